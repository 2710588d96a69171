//! Config schema, validation, and `--set` overrides.
//!
//! Every subcommand has a flat list of dotted keys. Validation walks the raw
//! JSON, rejects unknown keys, type- and range-checks every known key, fills
//! defaults, and reports all violations at once with their key paths.

use std::fmt;
use std::path::Path;

use serde_json::{json, Map, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}`: {}", self.key, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    DeviceHysteresis,
    NetworkHysteresis,
    Ensemble,
    Marginal,
    Reservoir,
    Train,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::DeviceHysteresis => "device-hysteresis",
            Command::NetworkHysteresis => "network-hysteresis",
            Command::Ensemble => "ensemble",
            Command::Marginal => "marginal",
            Command::Reservoir => "reservoir",
            Command::Train => "train",
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Float { min: f64, max: f64, open_min: bool },
    /// Float, or `null` meaning "derive from other settings".
    OptFloat { min: f64, max: f64 },
    Int { min: u64, max: u64 },
    /// Integer, or `null` meaning "no limit".
    OptInt { min: u64 },
    Bool,
    Choice(&'static [&'static str]),
    FloatList { min: f64, max: f64, open_min: bool },
    IntList { min: u64, max: u64 },
    Occupation,
    /// File path, resolved against the config file's directory.
    Path,
}

struct Field {
    key: &'static str,
    kind: Kind,
    /// `None` marks the key as required.
    default: Option<Value>,
}

const ORDERS: &[&str] = &["update-then-transmit", "transmit-then-update"];
const READOUTS: &[&str] = &["frozen", "update"];
const INF: f64 = f64::INFINITY;

fn f(key: &'static str, min: f64, max: f64, default: Option<Value>) -> Field {
    Field {
        key,
        kind: Kind::Float { min, max, open_min: false },
        default,
    }
}

fn pos(key: &'static str, default: Option<Value>) -> Field {
    Field {
        key,
        kind: Kind::Float {
            min: 0.0,
            max: INF,
            open_min: true,
        },
        default,
    }
}

fn int(key: &'static str, min: u64, max: u64, default: u64) -> Field {
    Field {
        key,
        kind: Kind::Int { min, max },
        default: Some(json!(default)),
    }
}

fn field(key: &'static str, kind: Kind, default: Value) -> Field {
    Field {
        key,
        kind,
        default: Some(default),
    }
}

fn required(key: &'static str, kind: Kind) -> Field {
    Field { key, kind, default: None }
}

fn drive_fields() -> Vec<Field> {
    vec![
        pos("drive.tau_osc", None),
        int("drive.steps_per_cycle", 2, 1_000_000, 400),
        int("drive.cycles", 3, 32, 5),
    ]
}

fn network_fields(d_values: Value, with_tau_ratio: bool) -> Vec<Field> {
    let mut out = vec![
        int("network.modes", 2, 12, 4),
        int("network.photon_bound", 1, 4, 2),
        pos("memory.n_max", Some(json!(2.0))),
        field("memory.p", Kind::OptFloat { min: 0.0, max: 1.0 }, Value::Null),
        field(
            "memory.d_values",
            Kind::FloatList {
                min: 0.0,
                max: INF,
                open_min: false,
            },
            d_values,
        ),
        field("memory.update_order", Kind::Choice(ORDERS), json!(ORDERS[0])),
    ];
    if with_tau_ratio {
        out.push(pos("memory.tau_ratio", Some(json!(0.7))));
    }
    out
}

fn reservoir_fields(d_values: Value) -> Vec<Field> {
    vec![
        pos("reservoir.n_max", Some(json!(3.0))),
        pos("reservoir.epsilon", Some(json!(1e-8))),
        field("reservoir.p", Kind::OptFloat { min: 0.0, max: 1.0 }, Value::Null),
        field(
            "reservoir.d_values",
            Kind::FloatList {
                min: 0.0,
                max: INF,
                open_min: false,
            },
            d_values,
        ),
        int("reservoir.window", 1, 28, 6),
        field("reservoir.reset_per_image", Kind::Bool, json!(true)),
        field("reservoir.readout", Kind::Choice(READOUTS), json!(READOUTS[0])),
        int("repeats", 1, 1000, 3),
        field("data.classes", Kind::IntList { min: 0, max: 9 }, json!([0, 1, 2])),
    ]
}

fn schema(cmd: Command) -> Vec<Field> {
    let mut fields = vec![int("seed", 0, u64::MAX, 0)];
    match cmd {
        Command::DeviceHysteresis => {
            fields.extend(drive_fields());
            fields.extend([
                pos("memory.tau_ratio", Some(json!(0.3))),
                pos("memory.n_max", Some(json!(1.0))),
                f("memory.p", 0.0, 1.0, Some(json!(0.5))),
                f("memory.d", 0.0, INF, Some(json!(10.0))),
                field("memory.update_order", Kind::Choice(ORDERS), json!(ORDERS[0])),
                field(
                    "gate_levels",
                    Kind::FloatList {
                        min: 0.0,
                        max: 1.0,
                        open_min: false,
                    },
                    json!([0.0, 0.5, 1.0]),
                ),
            ]);
        }
        Command::NetworkHysteresis => {
            fields.extend(drive_fields());
            fields.extend(network_fields(json!([0.0, 2.0, 5.0, 10.0]), true));
            fields.push(field("pair.i", Kind::Occupation, json!([0, 0, 0, 0])));
            fields.push(field("pair.j", Kind::Occupation, json!([0, 0, 1, 1])));
        }
        Command::Ensemble => {
            fields.extend(drive_fields());
            fields.extend(network_fields(json!([0.0, 10.0]), false));
            fields.push(field(
                "ensemble.tau_ratios",
                Kind::FloatList {
                    min: 0.0,
                    max: INF,
                    open_min: true,
                },
                json!([0.6, 0.7, 0.8, 0.9]),
            ));
            fields.push(field("ensemble.include_vacuum", Kind::Bool, json!(true)));
        }
        Command::Marginal => {
            fields.extend(drive_fields());
            fields.extend(network_fields(json!([0.0, 10.0]), true));
        }
        Command::Reservoir => {
            fields.extend(reservoir_fields(json!([0.0, 5.0, 10.0])));
            fields.extend([
                required("data.images", Kind::Path),
                required("data.labels", Kind::Path),
                field("data.per_class", Kind::OptInt { min: 1 }, json!(10)),
            ]);
        }
        Command::Train => {
            fields.extend(reservoir_fields(json!([0.0, 10.0])));
            fields.extend([
                required("data.train_images", Kind::Path),
                required("data.train_labels", Kind::Path),
                required("data.test_images", Kind::Path),
                required("data.test_labels", Kind::Path),
                field("data.train_per_class", Kind::OptInt { min: 1 }, Value::Null),
                field("data.test_per_class", Kind::OptInt { min: 1 }, Value::Null),
                int("training.epochs", 1, 100_000, 100),
                pos("training.learning_rate", Some(json!(0.05))),
                int("training.batch_size", 1, u32::MAX as u64, 256),
                f("training.beta1", 0.0, 0.999_999, Some(json!(0.9))),
                f("training.beta2", 0.0, 0.999_999_999, Some(json!(0.999))),
                pos("training.epsilon", Some(json!(1e-8))),
                int("training.report_last", 1, 100_000, 5),
            ]);
        }
    }
    fields
}

fn lookup<'a>(root: &'a Value, key: &str) -> Option<&'a Value> {
    key.split('.').try_fold(root, |v, part| v.get(part))
}

fn insert(root: &mut Map<String, Value>, key: &str, value: Value) {
    let mut parts = key.split('.').peekable();
    let mut node = root;
    while let Some(part) = parts.next() {
        if parts.peek().is_none() {
            node.insert(part.to_owned(), value);
            return;
        }
        let child = node.entry(part.to_owned()).or_insert_with(|| Value::Object(Map::new()));
        if !child.is_object() {
            *child = Value::Object(Map::new());
        }
        node = child.as_object_mut().expect("just made an object");
    }
}

/// Applies a `key=value` override; the value is parsed as JSON, falling back to a string.
pub fn apply_override(raw: &mut Value, spec: &str) -> Result<(), ConfigError> {
    let (key, text) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::new(spec, "override must look like key=value"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::new(key, "malformed key"));
    }
    let value = serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_owned()));
    let root = raw
        .as_object_mut()
        .ok_or_else(|| ConfigError::new("<root>", "config must be a JSON object"))?;
    insert(root, key, value);
    Ok(())
}

fn collect_unknown(value: &Value, prefix: &str, known: &[&str], errors: &mut Vec<ConfigError>) {
    let Some(map) = value.as_object() else { return };
    for (k, v) in map {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        if known.contains(&path.as_str()) {
            continue;
        }
        let is_group = known.iter().any(|key| key.starts_with(&format!("{path}.")));
        if is_group && v.is_object() {
            collect_unknown(v, &path, known, errors);
        } else if is_group {
            errors.push(ConfigError::new(path, "expected an object"));
        } else {
            errors.push(ConfigError::new(path, "unknown key"));
        }
    }
}

fn as_float(v: &Value) -> Option<f64> {
    v.as_f64().filter(|x| x.is_finite())
}

fn check_float(key: &str, x: f64, min: f64, max: f64, open_min: bool) -> Result<(), ConfigError> {
    let below = if open_min { x <= min } else { x < min };
    if below || x > max {
        let lo = if open_min { "(" } else { "[" };
        return Err(ConfigError::new(key, format!("{x} out of range {lo}{min}, {max}]")));
    }
    Ok(())
}

fn check_uint(key: &str, v: &Value, min: u64, max: u64) -> Result<u64, ConfigError> {
    let n = v
        .as_u64()
        .ok_or_else(|| ConfigError::new(key, format!("expected a non-negative integer, found {v}")))?;
    if n < min || n > max {
        return Err(ConfigError::new(key, format!("{n} out of range [{min}, {max}]")));
    }
    Ok(n)
}

fn check(key: &str, kind: Kind, v: &Value, base: &Path) -> Result<Value, ConfigError> {
    let list = |v: &Value| {
        v.as_array()
            .filter(|a| !a.is_empty())
            .cloned()
            .ok_or_else(|| ConfigError::new(key, format!("expected a non-empty list, found {v}")))
    };
    match kind {
        Kind::Float { min, max, open_min } => {
            let x = as_float(v).ok_or_else(|| ConfigError::new(key, format!("expected a number, found {v}")))?;
            check_float(key, x, min, max, open_min)?;
            Ok(json!(x))
        }
        Kind::OptFloat { .. } if v.is_null() => Ok(Value::Null),
        Kind::OptFloat { min, max } => check(key, Kind::Float { min, max, open_min: false }, v, base),
        Kind::Int { min, max } => Ok(json!(check_uint(key, v, min, max)?)),
        Kind::OptInt { .. } if v.is_null() => Ok(Value::Null),
        Kind::OptInt { min } => Ok(json!(check_uint(key, v, min, u64::MAX)?)),
        Kind::Bool => v
            .as_bool()
            .map(Value::Bool)
            .ok_or_else(|| ConfigError::new(key, format!("expected true or false, found {v}"))),
        Kind::Choice(options) => match v.as_str() {
            Some(s) if options.contains(&s) => Ok(json!(s)),
            _ => Err(ConfigError::new(key, format!("expected one of {options:?}, found {v}"))),
        },
        Kind::FloatList { min, max, open_min } => {
            let items = list(v)?;
            let mut out = Vec::with_capacity(items.len());
            for (i, item) in items.iter().enumerate() {
                let k = format!("{key}[{i}]");
                let x = as_float(item).ok_or_else(|| ConfigError::new(&k, format!("expected a number, found {item}")))?;
                check_float(&k, x, min, max, open_min)?;
                out.push(json!(x));
            }
            Ok(Value::Array(out))
        }
        Kind::IntList { min, max } => {
            let items = list(v)?;
            let mut out: Vec<u64> = Vec::with_capacity(items.len());
            for (i, item) in items.iter().enumerate() {
                let n = check_uint(&format!("{key}[{i}]"), item, min, max)?;
                if out.contains(&n) {
                    return Err(ConfigError::new(key, format!("{n} listed twice")));
                }
                out.push(n);
            }
            Ok(json!(out))
        }
        Kind::Occupation => {
            let items = list(v)?;
            let out = items
                .iter()
                .enumerate()
                .map(|(i, item)| check_uint(&format!("{key}[{i}]"), item, 0, 255))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(json!(out))
        }
        Kind::Path => {
            let s = v
                .as_str()
                .filter(|s| !s.is_empty())
                .ok_or_else(|| ConfigError::new(key, format!("expected a file path, found {v}")))?;
            let p = Path::new(s);
            let resolved = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
            Ok(json!(resolved.to_string_lossy()))
        }
    }
}

fn cross_checks(cmd: Command, resolved: &Value, errors: &mut Vec<ConfigError>) {
    if !matches!(cmd, Command::NetworkHysteresis) {
        return;
    }
    let (Some(modes), Some(bound)) = (
        lookup(resolved, "network.modes").and_then(Value::as_u64),
        lookup(resolved, "network.photon_bound").and_then(Value::as_u64),
    ) else {
        return;
    };
    let occ = |key| lookup(resolved, key).and_then(Value::as_array).map(|a| a.iter().filter_map(Value::as_u64).collect::<Vec<_>>());
    let (Some(i), Some(j)) = (occ("pair.i"), occ("pair.j")) else { return };
    for (key, o) in [("pair.i", &i), ("pair.j", &j)] {
        if o.len() as u64 != modes {
            errors.push(ConfigError::new(key, format!("has {} modes, network has {modes}", o.len())));
        } else if o.iter().sum::<u64>() > bound {
            errors.push(ConfigError::new(key, format!("exceeds photon bound {bound}")));
        }
    }
    if i == j {
        errors.push(ConfigError::new("pair.j", "must differ from pair.i"));
    }
}

/// Checks `raw` against the schema of `cmd` and returns the config with every key explicit.
pub fn validate_config(cmd: Command, raw: &Value, base_dir: &Path) -> Result<Value, Vec<ConfigError>> {
    if !raw.is_object() {
        return Err(vec![ConfigError::new("<root>", "config must be a JSON object")]);
    }
    let fields = schema(cmd);
    let known: Vec<&str> = fields.iter().map(|f| f.key).collect();
    let mut errors = Vec::new();
    collect_unknown(raw, "", &known, &mut errors);
    let mut resolved = Map::new();
    for field in &fields {
        let value = match (lookup(raw, field.key), &field.default) {
            (Some(v), _) => check(field.key, field.kind, v, base_dir),
            (None, Some(d)) => check(field.key, field.kind, d, base_dir),
            (None, None) => Err(ConfigError::new(field.key, "missing required key")),
        };
        match value {
            Ok(v) => insert(&mut resolved, field.key, v),
            Err(e) => errors.push(e),
        }
    }
    let resolved = Value::Object(resolved);
    cross_checks(cmd, &resolved, &mut errors);
    if errors.is_empty() {
        Ok(resolved)
    } else {
        Err(errors)
    }
}

/// Typed access into a validated config.
pub struct Resolved<'a>(pub &'a Value);

impl Resolved<'_> {
    fn get(&self, key: &str) -> &Value {
        lookup(self.0, key).unwrap_or_else(|| panic!("validated config lacks `{key}`"))
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.get(key).as_f64().expect("validated number")
    }

    pub fn opt_f64(&self, key: &str) -> Option<f64> {
        self.get(key).as_f64()
    }

    pub fn u64(&self, key: &str) -> u64 {
        self.get(key).as_u64().expect("validated integer")
    }

    pub fn usize(&self, key: &str) -> usize {
        self.u64(key) as usize
    }

    pub fn opt_usize(&self, key: &str) -> Option<usize> {
        self.get(key).as_u64().map(|n| n as usize)
    }

    pub fn bool(&self, key: &str) -> bool {
        self.get(key).as_bool().expect("validated bool")
    }

    pub fn str(&self, key: &str) -> &str {
        self.get(key).as_str().expect("validated string")
    }

    pub fn f64_list(&self, key: &str) -> Vec<f64> {
        self.get(key).as_array().expect("validated list").iter().filter_map(Value::as_f64).collect()
    }

    pub fn u8_list(&self, key: &str) -> Vec<u8> {
        self.get(key)
            .as_array()
            .expect("validated list")
            .iter()
            .filter_map(Value::as_u64)
            .map(|n| n as u8)
            .collect()
    }
}
