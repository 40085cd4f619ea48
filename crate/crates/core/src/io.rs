//! Run configuration files, result persistence and snapshot files.
//!
//! # Configuration grammar
//!
//! A run configuration is a TOML document. Only `scenario` is required; every
//! other key falls back to that scenario's preset. Unknown keys are errors.
//!
//! ```toml
//! scenario = "perturbed_wave"
//! t_final = 40.0
//! seed = 7
//! grid_refine = 0
//! max_steps = 2000000
//! snapshot_times = [0.0, 40.0]
//! out = "runs/wave"            # optional
//! grid = "auto"                # or { dx = 0.2 } or { L = 24.0, N = 481 }
//!
//! [params]
//! R = 1.0
//! gamma = 1.6666666666666667
//! mu = 1.0
//! kappa = 1.0
//! theta_minus = 0.5
//! theta_plus = 1.0
//! v_plus = 1.0
//! delta0 = "1/9"
//!
//! [initial]
//! shape = "gaussian"           # none | gaussian | cosine_bump | random_smooth
//! amplitudes = [0.05, 0.05, 0.05]
//! center = 0.0
//! width = 1.0
//!
//! [output]
//! t0 = 1.0
//! ratio = 1.25
//!
//! [sweep]
//! amplitudes = [0.0, 0.05, 0.1]
//! delta0 = [9, 17, 33]
//! extension = 4.0
//! oracle_amplitudes = [1e-3, 1e-4]
//! oracle_time = 10.0
//! oracle_dx = 0.05
//! fit_window = [10.0, 1000.0]
//! levels = 3
//! stationary_steps = 10000
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::{ExperimentError, ParamError};
use crate::experiments::{
    GridSpec, OutputSpec, RunRecord, Scenario, ScenarioKind, Snapshot, SweepSpec,
};
use crate::lagrangian::{InitialData, PerturbationShape};
use crate::params::{Delta0, PhysParams};

/// Version of the snapshot and summary layouts.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "CWLAB_OUT";

/// The configuration shipped with the repository.
pub const EXAMPLE_CONFIG: &str = include_str!("../../../configs/perturbed_wave.toml");

/// Column order of snapshot files.
pub const SNAPSHOT_COLUMNS: [&str; 10] = [
    "x", "v", "u", "theta", "V", "U", "Theta", "phi", "psi", "zeta",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
}

impl From<ExperimentError> for ConfigError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Param(ParamError::Invalid { field, reason }) => ConfigError::Invalid {
                field: field.to_string(),
                reason,
            },
            other => ConfigError::Invalid {
                field: "scenario".into(),
                reason: other.to_string(),
            },
        }
    }
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Config {
        path: PathBuf,
        #[source]
        source: ConfigError,
    },
    #[error("{path}: schema version {found} is not supported (expected {expected})")]
    SchemaMismatch {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("{path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parsed configuration: a validated scenario plus an optional output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum GridField {
    Auto,
    Spacing { dx: f64 },
    Fixed { half_width: f64, n_nodes: usize },
}

impl Serialize for GridField {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        match *self {
            GridField::Auto => serializer.serialize_str("auto"),
            GridField::Spacing { dx } => {
                let mut m = serializer.serialize_map(Some(1))?;
                m.serialize_entry("dx", &dx)?;
                m.end()
            }
            GridField::Fixed {
                half_width,
                n_nodes,
            } => {
                let mut m = serializer.serialize_map(Some(2))?;
                m.serialize_entry("L", &half_width)?;
                m.serialize_entry("N", &n_nodes)?;
                m.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for GridField {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Word(String),
            Table(GridTable),
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct GridTable {
            dx: Option<f64>,
            #[serde(rename = "L")]
            half_width: Option<f64>,
            #[serde(rename = "N")]
            n_nodes: Option<usize>,
        }
        let err = |m: &str| serde::de::Error::custom(m);
        match Raw::deserialize(deserializer)
            .map_err(|_| err(r#"grid must be "auto", { dx = .. } or { L = .., N = .. }"#))?
        {
            Raw::Word(w) if w == "auto" => Ok(GridField::Auto),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                r#"grid must be "auto", got {w:?}"#
            ))),
            Raw::Table(GridTable {
                dx: Some(dx),
                half_width: None,
                n_nodes: None,
            }) => Ok(GridField::Spacing { dx }),
            Raw::Table(GridTable {
                dx: None,
                half_width: Some(half_width),
                n_nodes: Some(n_nodes),
            }) => Ok(GridField::Fixed {
                half_width,
                n_nodes,
            }),
            Raw::Table(_) => Err(err("grid table needs either dx alone or both L and N")),
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    #[serde(rename = "R")]
    gas_constant: Option<f64>,
    gamma: Option<f64>,
    mu: Option<f64>,
    kappa: Option<f64>,
    theta_minus: Option<f64>,
    theta_plus: Option<f64>,
    v_plus: Option<f64>,
    delta0: Option<Delta0>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    shape: Option<PerturbationShape>,
    amplitudes: Option<[f64; 3]>,
    center: Option<f64>,
    width: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    t0: Option<f64>,
    ratio: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    amplitudes: Option<Vec<f64>>,
    delta0: Option<Vec<u32>>,
    extension: Option<f64>,
    oracle_amplitudes: Option<[f64; 2]>,
    oracle_time: Option<f64>,
    oracle_dx: Option<f64>,
    fit_window: Option<(f64, f64)>,
    levels: Option<usize>,
    stationary_steps: Option<usize>,
}

// scalar keys come before tables so the serialized form is valid TOML
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: ScenarioKind,
    t_final: Option<f64>,
    seed: Option<u64>,
    grid_refine: Option<u32>,
    max_steps: Option<usize>,
    snapshot_times: Option<Vec<f64>>,
    out: Option<PathBuf>,
    grid: Option<GridField>,
    params: Option<RawParams>,
    initial: Option<RawInitial>,
    output: Option<RawOutput>,
    sweep: Option<RawSweep>,
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        ConfigError::Syntax {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let mut s = Scenario::preset(raw.scenario);
    macro_rules! take {
        ($dst:expr, $src:expr) => {
            if let Some(v) = $src {
                $dst = v;
            }
        };
    }
    take!(s.t_final, raw.t_final);
    take!(s.seed, raw.seed);
    take!(s.grid_refine, raw.grid_refine);
    take!(s.max_steps, raw.max_steps);
    take!(s.snapshot_times, raw.snapshot_times);
    match raw.grid {
        None | Some(GridField::Auto) => {
            if !matches!(s.grid, GridSpec::Auto { .. }) && raw.grid.is_some() {
                s.grid = GridSpec::Auto { dx: 0.2 };
            }
        }
        Some(GridField::Spacing { dx }) => s.grid = GridSpec::Auto { dx },
        Some(GridField::Fixed {
            half_width,
            n_nodes,
        }) => {
            s.grid = GridSpec::Fixed {
                half_width,
                n_nodes,
            }
        }
    }
    if let Some(p) = raw.params {
        take!(s.params.gas_constant, p.gas_constant);
        take!(s.params.gamma, p.gamma);
        take!(s.params.mu, p.mu);
        take!(s.params.kappa, p.kappa);
        take!(s.params.theta_minus, p.theta_minus);
        take!(s.params.theta_plus, p.theta_plus);
        take!(s.params.v_plus, p.v_plus);
        take!(s.params.delta0, p.delta0);
    }
    if let Some(i) = raw.initial {
        take!(s.initial.shape, i.shape);
        take!(s.initial.amplitudes, i.amplitudes);
        take!(s.initial.center, i.center);
        take!(s.initial.width, i.width);
    }
    s.initial.seed = s.seed;
    if let Some(o) = raw.output {
        take!(s.output.t0, o.t0);
        take!(s.output.ratio, o.ratio);
    }
    if let Some(w) = raw.sweep {
        take!(s.sweep.amplitudes, w.amplitudes);
        take!(s.sweep.delta0, w.delta0);
        take!(s.sweep.extension, w.extension);
        take!(s.sweep.oracle_amplitudes, w.oracle_amplitudes);
        take!(s.sweep.oracle_time, w.oracle_time);
        take!(s.sweep.oracle_dx, w.oracle_dx);
        if w.fit_window.is_some() {
            s.sweep.fit_window = w.fit_window;
        }
        take!(s.sweep.levels, w.levels);
        take!(s.sweep.stationary_steps, w.stationary_steps);
    }
    s.validate()?;
    Ok(RunConfig {
        scenario: s,
        out: raw.out,
    })
}

impl RunConfig {
    /// Canonical text form; parsing it yields an identical configuration.
    pub fn to_toml(&self) -> String {
        let s = &self.scenario;
        let p: &PhysParams = &s.params;
        let i: &InitialData = &s.initial;
        let o: &OutputSpec = &s.output;
        let w: &SweepSpec = &s.sweep;
        let raw = RawConfig {
            scenario: s.kind,
            t_final: Some(s.t_final),
            seed: Some(s.seed),
            grid_refine: Some(s.grid_refine),
            max_steps: Some(s.max_steps),
            snapshot_times: Some(s.snapshot_times.clone()),
            out: self.out.clone(),
            grid: Some(match s.grid {
                GridSpec::Auto { dx } => GridField::Spacing { dx },
                GridSpec::Fixed {
                    half_width,
                    n_nodes,
                } => GridField::Fixed {
                    half_width,
                    n_nodes,
                },
            }),
            params: Some(RawParams {
                gas_constant: Some(p.gas_constant),
                gamma: Some(p.gamma),
                mu: Some(p.mu),
                kappa: Some(p.kappa),
                theta_minus: Some(p.theta_minus),
                theta_plus: Some(p.theta_plus),
                v_plus: Some(p.v_plus),
                delta0: Some(p.delta0),
            }),
            initial: Some(RawInitial {
                shape: Some(i.shape),
                amplitudes: Some(i.amplitudes),
                center: Some(i.center),
                width: Some(i.width),
            }),
            output: Some(RawOutput {
                t0: Some(o.t0),
                ratio: Some(o.ratio),
            }),
            sweep: Some(RawSweep {
                amplitudes: Some(w.amplitudes.clone()),
                delta0: Some(w.delta0.clone()),
                extension: Some(w.extension),
                oracle_amplitudes: Some(w.oracle_amplitudes),
                oracle_time: Some(w.oracle_time),
                oracle_dx: Some(w.oracle_dx),
                fit_window: w.fit_window,
                levels: Some(w.levels),
                stationary_steps: Some(w.stationary_steps),
            }),
        };
        toml::to_string(&raw).expect("configuration is always representable")
    }
}

pub fn read_config(path: &Path) -> Result<RunConfig, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text).map_err(|source| IoError::Config {
        path: path.to_path_buf(),
        source,
    })
}

/// SHA-256 of the canonical configuration, hex encoded.
pub fn params_hash(scenario: &Scenario) -> String {
    let canonical = RunConfig {
        scenario: scenario.clone(),
        out: None,
    }
    .to_toml();
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// `$CWLAB_OUT`, or `runs` when unset.
pub fn default_out_root() -> PathBuf {
    std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

/// Shortest text that parses back to the same value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Serialize)]
struct Summary<'a> {
    schema_version: u32,
    scenario: ScenarioKind,
    params_hash: String,
    config: &'a Scenario,
    grid: Option<crate::params::Grid>,
    steps: usize,
    passed: bool,
    failure: &'a Option<String>,
    flags: &'a [crate::experiments::Flag],
    fits: &'a std::collections::BTreeMap<String, crate::diagnostics::FitResult>,
    exponents: &'a std::collections::BTreeMap<String, crate::experiments::ExponentReport>,
    audits: &'a Option<crate::experiments::AuditSummary>,
    measurements: &'a std::collections::BTreeMap<String, f64>,
    tables: &'a std::collections::BTreeMap<String, crate::experiments::Table>,
}

/// Paths written by [`emit_series`].
#[derive(Debug, Clone, PartialEq)]
pub struct Emitted {
    pub summary: PathBuf,
    pub series: Vec<PathBuf>,
    pub snapshots: Vec<PathBuf>,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), IoError> {
    fs::write(path, contents).map_err(io_err(path))
}

/// Writes `series/<name>.csv`, `summary.json` and `snapshots/*.csv` under `dir`.
pub fn emit_series(record: &RunRecord, dir: &Path) -> Result<Emitted, IoError> {
    let series_dir = dir.join("series");
    fs::create_dir_all(&series_dir).map_err(io_err(&series_dir))?;
    let mut series = Vec::new();
    for (name, s) in &record.series {
        let mut text = String::from("t,value\n");
        for (t, v) in s.times.iter().zip(&s.values) {
            text.push_str(&fmt_f64(*t));
            text.push(',');
            text.push_str(&fmt_f64(*v));
            text.push('\n');
        }
        let path = series_dir.join(format!("{name}.csv"));
        write_file(&path, text.as_bytes())?;
        series.push(path);
    }

    let hash = params_hash(&record.scenario);
    let mut snapshots = Vec::new();
    if !record.snapshots.is_empty() {
        let snap_dir = dir.join("snapshots");
        fs::create_dir_all(&snap_dir).map_err(io_err(&snap_dir))?;
        for (k, snap) in record.snapshots.iter().enumerate() {
            let grid = record.grid.expect("snapshots imply a grid");
            let file = SnapshotFile::from_snapshot(snap, &grid.nodes(), &hash);
            let path = snap_dir.join(format!("snapshot_{k:03}.csv"));
            write_file(&path, file.to_text().as_bytes())?;
            snapshots.push(path);
        }
    }

    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        scenario: record.scenario.kind,
        params_hash: hash,
        config: &record.scenario,
        grid: record.grid,
        steps: record.steps,
        passed: record.passed(),
        failure: &record.failure,
        flags: &record.flags,
        fits: &record.fits,
        exponents: &record.exponents,
        audits: &record.audits,
        measurements: &record.measurements,
        tables: &record.tables,
    };
    let path = dir.join("summary.json");
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    write_file(&path, json.as_bytes())?;
    Ok(Emitted {
        summary: path,
        series,
        snapshots,
    })
}

/// Columnar fields at one time, in [`SNAPSHOT_COLUMNS`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFile {
    pub schema_version: u32,
    pub params_hash: String,
    pub t: f64,
    pub columns: [Vec<f64>; 10],
}

impl SnapshotFile {
    pub fn from_snapshot(snap: &Snapshot, x: &[f64], params_hash: &str) -> Self {
        let (s, p, d) = (&snap.state, &snap.profile, &snap.perturbation);
        Self {
            schema_version: SCHEMA_VERSION,
            params_hash: params_hash.to_string(),
            t: snap.t,
            columns: [
                x.to_vec(),
                s.v.clone(),
                s.u.clone(),
                s.theta.clone(),
                p.v.clone(),
                p.u.clone(),
                p.theta.clone(),
                d.phi.clone(),
                d.psi.clone(),
                d.zeta.clone(),
            ],
        }
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let k = SNAPSHOT_COLUMNS.iter().position(|c| *c == name)?;
        Some(&self.columns[k])
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# schema_version={}\n# params_hash={}\n# t={}\n{}\n",
            self.schema_version,
            self.params_hash,
            fmt_f64(self.t),
            SNAPSHOT_COLUMNS.join(",")
        );
        for j in 0..self.columns[0].len() {
            let row: Vec<String> = self.columns.iter().map(|c| fmt_f64(c[j])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses a snapshot, rejecting any schema version other than the current one.
    pub fn parse(text: &str, path: &Path) -> Result<Self, IoError> {
        let bad = |reason: String| IoError::Malformed {
            path: path.to_path_buf(),
            reason,
        };
        let mut lines = text.lines().enumerate();
        let mut header = |key: &str| -> Result<String, IoError> {
            let (n, line) = lines
                .next()
                .ok_or_else(|| bad(format!("missing {key} header")))?;
            line.strip_prefix("# ")
                .and_then(|l| l.strip_prefix(key))
                .and_then(|l| l.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| bad(format!("line {}: expected \"# {key}=...\"", n + 1)))
        };
        let version: u32 = header("schema_version")?
            .parse()
            .map_err(|_| bad("unreadable schema version".into()))?;
        if version != SCHEMA_VERSION {
            return Err(IoError::SchemaMismatch {
                path: path.to_path_buf(),
                found: version,
                expected: SCHEMA_VERSION,
            });
        }
        let params_hash = header("params_hash")?;
        let t: f64 = header("t")?
            .parse()
            .map_err(|_| bad("unreadable time".into()))?;
        match lines.next() {
            Some((_, cols)) if cols == SNAPSHOT_COLUMNS.join(",") => {}
            Some((n, _)) => return Err(bad(format!("line {}: unexpected column header", n + 1))),
            None => return Err(bad("missing column header".into())),
        }
        let mut columns: [Vec<f64>; 10] = Default::default();
        for (n, line) in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != SNAPSHOT_COLUMNS.len() {
                return Err(bad(format!(
                    "line {}: expected {} fields, found {}",
                    n + 1,
                    SNAPSHOT_COLUMNS.len(),
                    fields.len()
                )));
            }
            for (col, f) in columns.iter_mut().zip(fields) {
                col.push(
                    f.parse()
                        .map_err(|_| bad(format!("line {}: bad number {f:?}", n + 1)))?,
                );
            }
        }
        Ok(Self {
            schema_version: version,
            params_hash,
            t,
            columns,
        })
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text, path)
    }
}
