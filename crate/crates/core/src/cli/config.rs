//! Line-oriented `key = value` configuration files.
//!
//! ```text
//! # comment
//! gamma.family = "saturating_exp"
//! gamma.A = 1.0
//! grid.n_cells = 512
//! initial.theta0.values = [0.0, 0.5, 1.0]
//! ```
//!
//! Values are numbers, quoted strings, bare words (`rk4`) or one-line lists of
//! numbers. Keys are checked against a fixed vocabulary; later assignments win,
//! and `--set` overrides are applied after the file. A `preset` key starts from
//! the named preset's configuration instead of the built-in defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::experiments;
use crate::gamma::{fmt_f64, GammaError, GammaModel};
use crate::solver::{
    manufactured_initial_data, CosineTarget, FlatTarget, Grid, InitialData, ManufacturedSolution, Profile, Scheme,
    SimulationConfig, SolverError,
};

/// Where a value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    /// Position among the `--set` arguments, from 1.
    Override(usize),
    Preset,
    Default,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}"),
            Location::Override(n) => write!(f, "--set #{n}"),
            Location::Preset => write!(f, "preset"),
            Location::Default => write!(f, "default"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{at}: syntax error: {msg}")]
    Syntax { at: Location, msg: String },
    #[error("{at}: unknown key `{key}`")]
    UnknownKey { key: String, at: Location },
    #[error("{at}: `{key}` expects {expected}, found `{found}`")]
    TypeMismatch {
        key: String,
        at: Location,
        expected: &'static str,
        found: String,
    },
    #[error("{at}: `{key}`: {reason}")]
    Invalid { key: String, at: Location, reason: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Num { value: f64, raw: String },
    Str(String),
    List(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Float,
    Int,
    Str,
    List,
}

const FIELDS: [&str; 3] = ["u0", "ut0", "theta0"];

fn key_kind(key: &str) -> Option<Kind> {
    use Kind::*;
    let k = match key {
        "preset" | "gamma.family" | "time.scheme" | "mms.target" => Str,
        "grid.n_cells" | "diagnostics.snapshot_stride" => Int,
        "grid.length"
        | "a"
        | "D"
        | "time.t_end"
        | "time.safety"
        | "time.dt_max"
        | "time.max_growth"
        | "monitor.theta_cap"
        | "monitor.w12_cap"
        | "monitor.dt_min"
        | "diagnostics.interval"
        | "functional.B" => Float,
        "gamma.c" | "gamma.A" | "gamma.B" | "gamma.alpha" | "gamma.p" => Float,
        "gamma.xi" | "gamma.values" => List,
        _ => {
            let rest = key.strip_prefix("initial.")?;
            let (field, name) = rest.split_once('.')?;
            if !FIELDS.contains(&field) {
                return None;
            }
            match name {
                "kind" | "file" => Str,
                "mode" => Int,
                "values" => List,
                "value" | "offset" | "amplitude" | "center" | "width" | "wavenumber" => Float,
                _ => return None,
            }
        }
    };
    Some(k)
}

#[derive(Debug, Clone)]
struct Entry {
    value: Value,
    at: Location,
}

type Entries = BTreeMap<String, Entry>;

/// Parsed configuration plus the preset it was based on, if any.
#[derive(Debug, Clone)]
pub struct ParsedConfig {
    pub config: SimulationConfig,
    pub preset: Option<String>,
}

pub fn parse_config(text: &str) -> Result<ParsedConfig, ConfigError> {
    parse_config_with(text, &[], None)
}

/// Full entry point: file text, `--set key=value` overrides and the directory
/// against which `initial.*.file` paths resolve.
pub fn parse_config_with(text: &str, overrides: &[String], base_dir: Option<&Path>) -> Result<ParsedConfig, ConfigError> {
    let mut user = Entries::new();
    for (i, line) in text.lines().enumerate() {
        if let Some((key, value)) = parse_line(line, Location::Line(i + 1))? {
            user.insert(
                key,
                Entry {
                    value,
                    at: Location::Line(i + 1),
                },
            );
        }
    }
    for (i, item) in overrides.iter().enumerate() {
        let at = Location::Override(i + 1);
        if !item.contains('=') {
            return Err(ConfigError::Syntax {
                at,
                msg: format!("expected key=value, found `{item}`"),
            });
        }
        if let Some((key, value)) = parse_line(item, at)? {
            user.insert(key, Entry { value, at });
        }
    }
    let preset = match user.remove("preset") {
        Some(Entry {
            value: Value::Str(s), ..
        }) => Some(s),
        Some(_) => unreachable!("kind checked on parse"),
        None => None,
    };
    let mut entries = match &preset {
        Some(name) => {
            let p = experiments::preset(name).ok_or_else(|| ConfigError::Invalid {
                key: "preset".into(),
                at: locate(text, overrides, "preset"),
                reason: format!("unknown preset `{name}` (known: {})", experiments::PRESET_NAMES.join(", ")),
            })?;
            let mut base = Entries::new();
            for (key, raw) in canonical_entries(&p.config) {
                let value = parse_value(&key, &raw, Location::Preset)?;
                base.insert(
                    key,
                    Entry {
                        value,
                        at: Location::Preset,
                    },
                );
            }
            base
        }
        None => Entries::new(),
    };
    // a user-chosen family or profile kind discards the preset's parameters for it
    for (key, e) in &user {
        if let Some(prefix) = key.strip_suffix(".family").or_else(|| key.strip_suffix(".kind")) {
            if entries.get(key).map(|b| &b.value) != Some(&e.value) {
                entries.retain(|k, b| !(b.at == Location::Preset && k.starts_with(prefix)));
            }
        }
    }
    entries.extend(user);
    let config = Builder::new(entries, base_dir).build()?;
    Ok(ParsedConfig { config, preset })
}

fn locate(text: &str, overrides: &[String], key: &str) -> Location {
    for (i, o) in overrides.iter().enumerate().rev() {
        if o.split('=').next().map(str::trim) == Some(key) {
            return Location::Override(i + 1);
        }
    }
    text.lines()
        .enumerate()
        .filter(|(_, line)| line.split('=').next().map(str::trim) == Some(key))
        .last()
        .map_or(Location::Default, |(i, _)| Location::Line(i + 1))
}

fn parse_line(line: &str, at: Location) -> Result<Option<(String, Value)>, ConfigError> {
    let line = strip_comment(line).trim();
    if line.is_empty() {
        return Ok(None);
    }
    let Some((key, raw)) = line.split_once('=') else {
        return Err(ConfigError::Syntax {
            at,
            msg: format!("expected `key = value`, found `{line}`"),
        });
    };
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::Syntax {
            at,
            msg: "empty key".into(),
        });
    }
    Ok(Some((key.to_string(), parse_value(key, raw.trim(), at)?)))
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_value(key: &str, raw: &str, at: Location) -> Result<Value, ConfigError> {
    let kind = key_kind(key).ok_or_else(|| ConfigError::UnknownKey { key: key.into(), at })?;
    let mismatch = |expected: &'static str| ConfigError::TypeMismatch {
        key: key.into(),
        at,
        expected,
        found: raw.into(),
    };
    if raw.is_empty() {
        return Err(ConfigError::Syntax {
            at,
            msg: format!("missing value for `{key}`"),
        });
    }
    let value = if let Some(body) = raw.strip_prefix('"') {
        let Some(end) = body.find('"') else {
            return Err(ConfigError::Syntax {
                at,
                msg: "unterminated string".into(),
            });
        };
        if !body[end + 1..].trim().is_empty() {
            return Err(ConfigError::Syntax {
                at,
                msg: format!("trailing text after string in `{raw}`"),
            });
        }
        Value::Str(body[..end].to_string())
    } else if let Some(body) = raw.strip_prefix('[') {
        let Some(body) = body.strip_suffix(']') else {
            return Err(ConfigError::Syntax {
                at,
                msg: "unterminated list".into(),
            });
        };
        let mut items = Vec::new();
        if !body.trim().is_empty() {
            for item in body.split(',') {
                items.push(item.trim().parse::<f64>().map_err(|_| mismatch("a list of numbers"))?);
            }
        }
        Value::List(items)
    } else if let Ok(v) = raw.parse::<f64>() {
        Value::Num {
            value: v,
            raw: raw.to_string(),
        }
    } else if raw.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        Value::Str(raw.to_string())
    } else {
        return Err(ConfigError::Syntax {
            at,
            msg: format!("cannot read value `{raw}`"),
        });
    };
    let ok = match (kind, &value) {
        (Kind::Float, Value::Num { .. }) | (Kind::Str, Value::Str(_)) | (Kind::List, Value::List(_)) => true,
        (Kind::Int, Value::Num { raw, .. }) => raw.parse::<u64>().is_ok(),
        _ => false,
    };
    if !ok {
        return Err(mismatch(match kind {
            Kind::Float => "a number",
            Kind::Int => "a nonnegative integer",
            Kind::Str => "a string",
            Kind::List => "a list of numbers",
        }));
    }
    Ok(value)
}

struct Builder<'a> {
    entries: Entries,
    used: Vec<String>,
    base_dir: Option<&'a Path>,
}

impl<'a> Builder<'a> {
    fn new(entries: Entries, base_dir: Option<&'a Path>) -> Self {
        Self {
            entries,
            used: Vec::new(),
            base_dir,
        }
    }

    fn at(&self, key: &str) -> Location {
        self.entries.get(key).map_or(Location::Default, |e| e.at)
    }

    fn invalid(&self, key: &str, reason: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            key: key.into(),
            at: self.at(key),
            reason: reason.into(),
        }
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        let e = self.entries.get(key)?;
        self.used.push(key.to_string());
        Some(e.value.clone())
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        match self.take(key)? {
            Value::Num { value, .. } => Some(value),
            _ => None,
        }
    }

    fn int(&mut self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.take(key) {
            Some(Value::Num { raw, .. }) => raw
                .parse::<u64>()
                .map(Some)
                .map_err(|_| self.invalid(key, format!("integer out of range: {raw}"))),
            _ => Ok(None),
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.take(key)? {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    fn list(&mut self, key: &str) -> Option<Vec<f64>> {
        match self.take(key)? {
            Value::List(v) => Some(v),
            _ => None,
        }
    }

    fn require_float(&mut self, key: &str) -> Result<f64, ConfigError> {
        self.float(key).ok_or_else(|| ConfigError::Missing(key.into()))
    }

    fn build(mut self) -> Result<SimulationConfig, ConfigError> {
        let length = self.require_float("grid.length")?;
        let n_cells = self
            .int("grid.n_cells")?
            .ok_or_else(|| ConfigError::Missing("grid.n_cells".into()))?;
        let n_cells = usize::try_from(n_cells).map_err(|_| self.invalid("grid.n_cells", "too large"))?;
        let grid = Grid::new(length, n_cells).map_err(|e| self.solver_error(e))?;
        let a = self.require_float("a")?;
        let d = self.require_float("D")?;
        let gamma = self.gamma()?;
        let target = self.mms_target(length)?;
        let initial = match &target {
            Some(t) => {
                if let Some(k) = self
                    .entries
                    .iter()
                    .find(|(k, e)| k.starts_with("initial.") && e.at != Location::Preset)
                    .map(|(k, _)| k.clone())
                {
                    return Err(self.invalid(&k, "initial data are fixed by mms.target"));
                }
                manufactured_initial_data(t.as_ref(), &grid)
            }
            None => InitialData {
                u0: self.profile("u0", &grid)?,
                ut0: self.profile("ut0", &grid)?,
                theta0: self.profile("theta0", &grid)?,
            },
        };
        let t_end = self.require_float("time.t_end")?;
        let mut c = SimulationConfig::new(grid, a, d, gamma, initial, t_end);
        c.forcing = target;
        if let Some(s) = self.string("time.scheme") {
            c.time.scheme = match s.as_str() {
                "rk4" => Scheme::Rk4,
                "imex" => Scheme::Imex,
                _ => return Err(self.invalid("time.scheme", format!("expected rk4 or imex, found `{s}`"))),
            };
        }
        for (key, slot) in [
            ("time.safety", &mut c.time.safety),
            ("time.dt_max", &mut c.time.dt_max),
            ("time.max_growth", &mut c.time.max_growth),
            ("monitor.theta_cap", &mut c.monitors.theta_cap),
            ("monitor.w12_cap", &mut c.monitors.w12_cap),
            ("monitor.dt_min", &mut c.monitors.dt_min),
            ("diagnostics.interval", &mut c.diagnostics.interval),
        ] {
            if let Some(v) = self.float(key) {
                *slot = v;
            }
        }
        if let Some(s) = self.int("diagnostics.snapshot_stride")? {
            c.diagnostics.snapshot_stride = s as usize;
        }
        c.functional_b = self.float("functional.B");
        self.reject_unused()?;
        c.validate().map_err(|e| self.solver_error(e))?;
        Ok(c)
    }

    fn gamma(&mut self) -> Result<GammaModel, ConfigError> {
        let family = self
            .string("gamma.family")
            .ok_or_else(|| ConfigError::Missing("gamma.family".into()))?;
        let req = |b: &mut Self, name: &str| b.require_float(&format!("gamma.{name}"));
        let model = match family.as_str() {
            "constant" => GammaModel::constant(req(self, "c")?),
            "saturating_exp" => {
                let (a, b, alpha) = (req(self, "A")?, req(self, "B")?, req(self, "alpha")?);
                GammaModel::saturating_exp(a, b, alpha)
            }
            "logarithmic" => {
                let (a, b) = (req(self, "A")?, req(self, "B")?);
                GammaModel::logarithmic(a, b)
            }
            "power" => {
                let (c, p) = (req(self, "c")?, req(self, "p")?);
                GammaModel::power(c, p)
            }
            "tabulated" => {
                let xs = self.list("gamma.xi").ok_or_else(|| ConfigError::Missing("gamma.xi".into()))?;
                let ys = self
                    .list("gamma.values")
                    .ok_or_else(|| ConfigError::Missing("gamma.values".into()))?;
                GammaModel::tabulated(xs, ys)
            }
            other => {
                return Err(self.invalid(
                    "gamma.family",
                    format!("unknown family `{other}` (constant, saturating_exp, logarithmic, power, tabulated)"),
                ))
            }
        };
        model.map_err(|e| self.gamma_error(e))
    }

    fn gamma_error(&self, e: GammaError) -> ConfigError {
        let key = match &e {
            GammaError::InvalidParameter { reason, .. } => {
                let first = reason.split_whitespace().next().unwrap_or("");
                // "B < A required" is a statement about B
                match first {
                    "A" | "B" | "alpha" | "c" | "p" => format!("gamma.{first}"),
                    _ if reason.contains("values") => "gamma.values".into(),
                    _ if reason.contains("knot") => "gamma.xi".into(),
                    _ => "gamma.family".into(),
                }
            }
            _ => "gamma.family".into(),
        };
        let reason = match &e {
            GammaError::InvalidParameter { reason, .. } => reason.clone(),
            other => other.to_string(),
        };
        self.invalid(&key, reason)
    }

    fn mms_target(&mut self, length: f64) -> Result<Option<Arc<dyn ManufacturedSolution>>, ConfigError> {
        match self.string("mms.target").as_deref() {
            None | Some("none") => Ok(None),
            Some("cosine") => Ok(Some(Arc::new(CosineTarget::standard(length)))),
            Some("flat") => Ok(Some(Arc::new(FlatTarget::standard(length)))),
            Some(other) => Err(self.invalid("mms.target", format!("expected none, cosine or flat, found `{other}`"))),
        }
    }

    fn profile(&mut self, field: &str, grid: &Grid) -> Result<Profile, ConfigError> {
        let key = |name: &str| format!("initial.{field}.{name}");
        let default_kind = if field == "u0" { "cosine_bump" } else { "flat" };
        let kind = self.string(&key("kind")).unwrap_or_else(|| default_kind.to_string());
        let num = |b: &mut Self, name: &str, default: f64| b.float(&key(name)).unwrap_or(default);
        let profile = match kind.as_str() {
            "flat" => Profile::Flat {
                value: num(self, "value", 0.0),
            },
            "cosine_bump" => {
                let offset = num(self, "offset", 0.0);
                let amplitude = num(self, "amplitude", 1.0);
                let mode = self.int(&key("mode"))?.unwrap_or(1);
                let mode = u32::try_from(mode).map_err(|_| self.invalid(&key("mode"), "mode too large"))?;
                Profile::CosineBump { offset, amplitude, mode }
            }
            "packet" => Profile::Packet {
                offset: num(self, "offset", 0.0),
                amplitude: num(self, "amplitude", 1.0),
                center: num(self, "center", 0.5 * grid.length()),
                width: num(self, "width", 0.25 * grid.length()),
                wavenumber: num(self, "wavenumber", 0.0),
            },
            "tabulated" => {
                let values = match (self.list(&key("values")), self.string(&key("file"))) {
                    (Some(_), Some(_)) => return Err(self.invalid(&key("file"), "give either values or file, not both")),
                    (Some(v), None) => v,
                    (None, Some(path)) => self.read_values(&key("file"), &path)?,
                    (None, None) => return Err(ConfigError::Missing(key("values"))),
                };
                Profile::Tabulated { values }
            }
            other => {
                return Err(self.invalid(
                    &key("kind"),
                    format!("unknown profile `{other}` (flat, cosine_bump, packet, tabulated)"),
                ))
            }
        };
        profile.validate(grid, field).map_err(|e| self.solver_error(e))?;
        Ok(profile)
    }

    fn read_values(&self, key: &str, path: &str) -> Result<Vec<f64>, ConfigError> {
        let full: PathBuf = match self.base_dir {
            Some(dir) => dir.join(path),
            None => PathBuf::from(path),
        };
        let text = std::fs::read_to_string(&full).map_err(|e| self.invalid(key, format!("{}: {e}", full.display())))?;
        text.split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| self.invalid(key, format!("not a number: `{s}`")))
            })
            .collect()
    }

    fn solver_error(&self, e: SolverError) -> ConfigError {
        let msg = match &e {
            SolverError::InvalidConfig(m) => m.clone(),
            SolverError::Gamma(g) => return self.gamma_error(g.clone()),
            other => other.to_string(),
        };
        let head = msg.split([' ', ':']).next().unwrap_or("");
        let key = if key_kind(head).is_some() {
            head.to_string()
        } else if let Some(field) = head.strip_prefix("initial.") {
            format!("initial.{field}.kind")
        } else {
            "config".to_string()
        };
        let at = self.at(&key);
        let at = if at == Location::Default && key.starts_with("initial.") {
            self.entries
                .iter()
                .find(|(k, _)| k.starts_with(&key[..key.len() - 4]))
                .map_or(Location::Default, |(_, e)| e.at)
        } else {
            at
        };
        ConfigError::Invalid { key, at, reason: msg }
    }

    fn reject_unused(&self) -> Result<(), ConfigError> {
        for (key, e) in &self.entries {
            if e.at != Location::Preset && !self.used.iter().any(|k| k == key) {
                return Err(ConfigError::Invalid {
                    key: key.clone(),
                    at: e.at,
                    reason: "not used by the selected family or profile kind".into(),
                });
            }
        }
        Ok(())
    }
}

/// Every setting of `config` as `(key, value text)`, in canonical order.
pub fn canonical_entries(config: &SimulationConfig) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = vec![
        ("grid.length".into(), fmt_f64(config.grid.length())),
        ("grid.n_cells".into(), config.grid.n_cells().to_string()),
        ("a".into(), fmt_f64(config.a)),
        ("D".into(), fmt_f64(config.d)),
    ];
    for (k, v) in config.gamma.config_entries() {
        out.push((format!("gamma.{k}"), v));
    }
    match &config.forcing {
        Some(target) => out.push(("mms.target".into(), format!("\"{}\"", target.name()))),
        None => {
            for (field, p) in [
                ("u0", &config.initial.u0),
                ("ut0", &config.initial.ut0),
                ("theta0", &config.initial.theta0),
            ] {
                for (k, v) in p.config_entries() {
                    out.push((format!("initial.{field}.{k}"), v));
                }
            }
        }
    }
    let t = &config.time;
    out.push(("time.t_end".into(), fmt_f64(t.t_end)));
    out.push(("time.scheme".into(), format!("\"{}\"", t.scheme.name())));
    out.push(("time.safety".into(), fmt_f64(t.safety)));
    out.push(("time.dt_max".into(), fmt_f64(t.dt_max)));
    out.push(("time.max_growth".into(), fmt_f64(t.max_growth)));
    let m = &config.monitors;
    out.push(("monitor.theta_cap".into(), fmt_f64(m.theta_cap)));
    out.push(("monitor.w12_cap".into(), fmt_f64(m.w12_cap)));
    out.push(("monitor.dt_min".into(), fmt_f64(m.dt_min)));
    out.push(("diagnostics.interval".into(), fmt_f64(config.diagnostics.interval)));
    out.push((
        "diagnostics.snapshot_stride".into(),
        config.diagnostics.snapshot_stride.to_string(),
    ));
    if let Some(b) = config.functional_b {
        out.push(("functional.B".into(), fmt_f64(b)));
    }
    out
}

/// Canonical text form: one `key = value` per line, fixed order, round-trip
/// precision. Parsing it reproduces the same text.
pub fn canonical_text(config: &SimulationConfig) -> String {
    let mut s = String::new();
    for (k, v) in canonical_entries(config) {
        s.push_str(&k);
        s.push_str(" = ");
        s.push_str(&v);
        s.push('\n');
    }
    s
}

/// Hex SHA-256 of [`canonical_text`].
pub fn config_hash(config: &SimulationConfig) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(canonical_text(config).as_bytes()))
}
