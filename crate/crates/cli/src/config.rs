//! Flat `key = value` configuration with one level of `[section]` headers.

use critfield::variance_model::{parse_real, FieldParams, Hurst};
use critfield::Error;
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

/// Section name used for keys that appear before any header.
pub const TOP: &str = "";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Command {
    Criteria,
    Simulate,
    Sojourn,
    Construct,
    Cover,
    Hit,
}

impl Command {
    pub const ALL: [Command; 6] =
        [Command::Criteria, Command::Simulate, Command::Sojourn, Command::Construct, Command::Cover, Command::Hit];

    pub fn name(self) -> &'static str {
        match self {
            Command::Criteria => "criteria",
            Command::Simulate => "simulate",
            Command::Sojourn => "sojourn",
            Command::Construct => "construct",
            Command::Cover => "cover",
            Command::Hit => "hit",
        }
    }

    /// Keys accepted in this command's section.
    pub fn keys(self) -> &'static [&'static str] {
        match self {
            Command::Criteria => &["r_min"],
            Command::Simulate => &["lo", "hi", "spacing", "reference_lag", "band_lo", "band_hi"],
            Command::Sojourn => &["eps", "beta", "n_max", "u_grid"],
            Command::Construct => &["count", "identity_p"],
            Command::Cover => &["region_lo", "region_hi", "spacing", "residual_order", "net_order", "c1", "c2", "n0"],
            Command::Hit => &["lo", "hi", "z", "deltas", "mu_ladder", "mu_replications"],
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown command '{s}'")))
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Keys accepted before any section header.
pub const TOP_KEYS: &[&str] =
    &["command", "N", "d", "H", "gamma", "delta0", "seed", "replications", "out", "threads", "source", "strict"];

/// Ordered `section → key → value` map. Values are kept verbatim (trimmed).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigMap {
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut map = ConfigMap::default();
        let mut section = TOP.to_string();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Format(format!("line {}: unterminated section header", lineno + 1)))?
                    .trim();
                if name.is_empty() || name.contains(['[', ']', '.', '=']) {
                    return Err(Error::Format(format!("line {}: bad section name '{name}'", lineno + 1)));
                }
                section = name.to_string();
                map.sections.entry(section.clone()).or_default();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line {}: expected key = value", lineno + 1)))?;
            let k = k.trim();
            if k.is_empty() || k.contains(char::is_whitespace) {
                return Err(Error::Format(format!("line {}: bad key '{k}'", lineno + 1)));
            }
            map.set(&section, k, v.trim());
        }
        Ok(map)
    }

    /// Canonical text: top-level keys first, then sections in name order.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        if let Some(top) = self.sections.get(TOP) {
            for (k, v) in top {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        for (name, keys) in self.sections.iter().filter(|(n, _)| !n.is_empty()) {
            out.push_str(&format!("\n[{name}]\n"));
            for (k, v) in keys {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }

    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        self.sections.entry(section.to_string()).or_default().insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section).and_then(|s| s.get(key)).map(String::as_str)
    }

    /// Applies a command-line `key=value` or `section.key=value` override.
    /// Bare keys go to the top level when they are top-level keys and to the
    /// command's section otherwise.
    pub fn apply_override(&mut self, command: Command, arg: &str) -> Result<(), Error> {
        let (k, v) = arg
            .split_once('=')
            .ok_or_else(|| Error::Domain(format!("argument '{arg}' is not of the form key=value")))?;
        let (k, v) = (k.trim(), v.trim());
        match k.split_once('.') {
            Some((section, key)) => self.set(section, key, v),
            None if TOP_KEYS.contains(&k) => self.set(TOP, k, v),
            None => self.set(command.name(), k, v),
        }
        Ok(())
    }

    /// Every key that is not part of the schema, as `section.key` (or `key` at top level).
    pub fn unknown_keys(&self) -> Vec<String> {
        let mut unknown = Vec::new();
        for (section, keys) in &self.sections {
            let allowed: &[&str] = if section.is_empty() {
                TOP_KEYS
            } else {
                match Command::from_str(section) {
                    Ok(c) => c.keys(),
                    Err(_) => &[],
                }
            };
            for k in keys.keys() {
                if !allowed.contains(&k.as_str()) {
                    unknown.push(if section.is_empty() { k.clone() } else { format!("{section}.{k}") });
                }
            }
        }
        unknown
    }
}

/// Which generator produces field paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Exact,
    Spectral,
}

/// Typed view of a validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub params: FieldParams,
    pub seed: u64,
    pub replications: Option<usize>,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub source: Option<SourceKind>,
    pub strict: bool,
    /// Merged configuration, echoed into the manifest and hashed.
    pub map: ConfigMap,
}

fn parse_as<T: FromStr>(key: &str, v: &str) -> Result<T, Error> {
    v.parse::<T>().map_err(|_| Error::Domain(format!("bad value for {key}: '{v}'")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, Error> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Domain(format!("bad value for {key}: '{v}' (expected true or false)"))),
    }
}

impl RunConfig {
    /// Validates `map` against the schema for `command`.
    pub fn from_map(command: Command, mut map: ConfigMap) -> Result<Self, Error> {
        if let Some(c) = map.get(TOP, "command") {
            if c != command.name() {
                return Err(Error::Domain(format!("config is for command '{c}', invoked as '{command}'")));
            }
        }
        map.set(TOP, "command", command.name());
        let unknown = map.unknown_keys();
        if !unknown.is_empty() {
            return Err(Error::Domain(format!("unknown config keys: {}", unknown.join(", "))));
        }
        let required = |k: &str| map.get(TOP, k).ok_or_else(|| Error::Domain(format!("missing required key: {k}")));
        let n: usize = parse_as("N", required("N")?)?;
        let d: usize = parse_as("d", required("d")?)?;
        let h: Hurst = required("H")?.parse().map_err(|e: Error| Error::Domain(format!("bad value for H: {e}")))?;
        let gamma = map.get(TOP, "gamma").map(parse_real).transpose()?.unwrap_or(0.0);
        let delta0 = map.get(TOP, "delta0").map(parse_real).transpose()?.unwrap_or(0.5);
        let params = FieldParams::new(n, d, h, gamma, delta0)?;
        let seed = map.get(TOP, "seed").map(|v| parse_as("seed", v)).transpose()?.unwrap_or(1);
        let replications = map.get(TOP, "replications").map(|v| parse_as("replications", v)).transpose()?;
        if replications == Some(0) {
            return Err(Error::Domain("replications must be positive".into()));
        }
        let out = PathBuf::from(map.get(TOP, "out").unwrap_or("out"));
        let threads = map.get(TOP, "threads").map(|v| parse_as("threads", v)).transpose()?;
        if threads == Some(0) {
            return Err(Error::Domain("threads must be positive".into()));
        }
        let source = match map.get(TOP, "source") {
            None | Some("auto") => None,
            Some("exact") => Some(SourceKind::Exact),
            Some("spectral") => Some(SourceKind::Spectral),
            Some(v) => return Err(Error::Domain(format!("bad value for source: '{v}' (exact, spectral or auto)"))),
        };
        let strict = map.get(TOP, "strict").map(|v| parse_bool("strict", v)).transpose()?.unwrap_or(false);
        Ok(RunConfig { command, params, seed, replications, out, threads, source, strict, map })
    }

    pub fn section(&self) -> Section<'_> {
        Section { name: self.command.name(), map: &self.map }
    }
}

/// Typed accessors for the command's own section.
pub struct Section<'a> {
    name: &'static str,
    map: &'a ConfigMap,
}

impl Section<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(self.name, key)
    }

    fn label(&self, key: &str) -> String {
        format!("{}.{key}", self.name)
    }

    pub fn real(&self, key: &str, default: f64) -> Result<f64, Error> {
        self.raw(key).map(parse_real).transpose().map(|v| v.unwrap_or(default))
    }

    pub fn opt_real(&self, key: &str) -> Result<Option<f64>, Error> {
        self.raw(key).map(parse_real).transpose()
    }

    pub fn uint<T: FromStr>(&self, key: &str, default: T) -> Result<T, Error> {
        match self.raw(key) {
            Some(v) => parse_as(&self.label(key), v),
            None => Ok(default),
        }
    }

    /// Comma-separated reals (each may be `p/q`).
    pub fn reals(&self, key: &str) -> Result<Option<Vec<f64>>, Error> {
        self.raw(key)
            .map(|v| {
                let out = v.split(',').map(parse_real).collect::<Result<Vec<f64>, Error>>()?;
                if out.is_empty() {
                    return Err(Error::Domain(format!("{} must not be empty", self.label(key))));
                }
                Ok(out)
            })
            .transpose()
    }

    pub fn uints(&self, key: &str) -> Result<Option<Vec<u64>>, Error> {
        self.raw(key)
            .map(|v| v.split(',').map(|x| parse_as(&self.label(key), x.trim())).collect())
            .transpose()
    }
}
