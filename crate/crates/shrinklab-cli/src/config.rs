//! Flat `key = value` scenario configs.
//!
//! ```text
//! # comment
//! scenario = levy-tau
//! seed = 7
//! n_paths = 2000
//!
//! [levy-tau]
//! levels = 12
//! ```
//!
//! Top-level keys describe the run; each `[section]` holds parameters of the
//! scenario with that name. Sections of other scenarios are checked but unused.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::scenarios::{self, ParamKind, ScenarioInfo};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub origin: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.origin, l, self.message),
            None => write!(f, "{}: {}", self.origin, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

pub const TOP_LEVEL_KEYS: &[&str] = &["scenario", "seed", "n_paths", "horizon", "steps", "output_dir"];

/// A fully resolved run description: every parameter has a value.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub scenario: &'static ScenarioInfo,
    pub seed: u64,
    pub n_paths: usize,
    pub horizon: f64,
    /// `None` for scenarios on a graded mesh.
    pub steps: Option<usize>,
    pub output_dir: Option<PathBuf>,
    params: BTreeMap<&'static str, String>,
    /// Keys that were given explicitly, for the resolved-defaults echo.
    explicit: Vec<&'static str>,
}

impl Config {
    /// Defaults of a scenario, as used by the acceptance runs.
    pub fn defaults(name: &str) -> Option<Self> {
        let info = scenarios::find(name)?;
        Some(Self {
            scenario: info,
            seed: info.seed,
            n_paths: info.n_paths,
            horizon: info.horizon,
            steps: info.steps,
            output_dir: None,
            params: info.params.iter().map(|p| (p.key, p.default.to_string())).collect(),
            explicit: Vec::new(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError { origin: origin.clone(), line: None, message: e.to_string() })?;
        let mut cfg = parse(&text, &origin)?;
        // relative output directories are taken from the config's location
        if let Some(dir) = cfg.output_dir.as_mut() {
            if dir.is_relative() {
                if let Some(parent) = path.parent() {
                    *dir = parent.join(&*dir);
                }
            }
        }
        Ok(cfg)
    }

    pub fn text(&self, key: &str) -> &str {
        self.params.get(key).unwrap_or_else(|| panic!("scenario {} has no parameter {key}", self.scenario.name))
    }

    pub fn float(&self, key: &str) -> f64 {
        self.text(key).parse().expect("validated at parse time")
    }

    pub fn int(&self, key: &str) -> usize {
        self.text(key).parse().expect("validated at parse time")
    }

    pub fn floats(&self, key: &str) -> Vec<f64> {
        parse_float_list(self.text(key)).expect("validated at parse time")
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let err = |message: String| ConfigError { origin: "override".into(), line: None, message };
        let spec = self
            .scenario
            .params
            .iter()
            .find(|p| p.key == key)
            .ok_or_else(|| err(format!("unknown key `{key}` for scenario {}", self.scenario.name)))?;
        check_value(spec.kind, value).map_err(err)?;
        self.params.insert(spec.key, value.to_string());
        Ok(())
    }

    /// Grid description for report headers.
    pub fn grid_label(&self) -> String {
        match self.steps {
            Some(s) => format!("T={} steps={} dt={:e}", self.horizon, s, self.horizon / s as f64),
            None => format!(
                "T={} graded resolution={} t_min={}",
                self.horizon,
                self.text("resolution"),
                self.text("t_min")
            ),
        }
    }

    /// `key = value` lines of every resolved setting, defaults marked.
    pub fn echo(&self) -> String {
        let mark = |k: &str| if self.explicit.contains(&k) { "" } else { "  # default" };
        let mut s = String::new();
        s.push_str(&format!("scenario = {}\n", self.scenario.name));
        s.push_str(&format!("seed = {}{}\n", self.seed, mark("seed")));
        s.push_str(&format!("n_paths = {}{}\n", self.n_paths, mark("n_paths")));
        s.push_str(&format!("horizon = {}{}\n", self.horizon, mark("horizon")));
        if let Some(st) = self.steps {
            s.push_str(&format!("steps = {st}{}\n", mark("steps")));
        }
        if let Some(d) = &self.output_dir {
            s.push_str(&format!("output_dir = {}\n", d.display()));
        }
        s.push_str(&format!("[{}]\n", self.scenario.name));
        for p in self.scenario.params {
            let v = &self.params[p.key];
            s.push_str(&format!("{} = {v}{}\n", p.key, mark(p.key)));
        }
        s
    }
}

pub fn parse_float_list(s: &str) -> Result<Vec<f64>, String> {
    let v: Result<Vec<f64>, _> = s.split(';').map(|x| x.trim()).filter(|x| !x.is_empty()).map(str::parse).collect();
    match v {
        Ok(v) if !v.is_empty() => Ok(v),
        Ok(_) => Err("empty list".into()),
        Err(e) => Err(format!("bad number in list `{s}`: {e}")),
    }
}

fn check_value(kind: ParamKind, v: &str) -> Result<(), String> {
    match kind {
        ParamKind::Float { min, max } => {
            let x: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
            if !(x >= min && x <= max) {
                return Err(format!("{x} outside [{min}, {max}]"));
            }
        }
        ParamKind::Int { min, max } => {
            let x: usize = v.parse().map_err(|_| format!("`{v}` is not a nonnegative integer"))?;
            if x < min || x > max {
                return Err(format!("{x} outside [{min}, {max}]"));
            }
        }
        ParamKind::FloatList => {
            parse_float_list(v)?;
        }
        ParamKind::Target => {
            scenarios::parse_targets(v)?;
        }
        ParamKind::Prior => {
            scenarios::parse_prior(v)?;
        }
    }
    Ok(())
}

struct Entry {
    line: usize,
    value: String,
}

pub fn parse(text: &str, origin: &str) -> Result<Config, ConfigError> {
    let err = |line: usize, message: String| ConfigError { origin: origin.to_string(), line: Some(line), message };
    let mut top: BTreeMap<String, Entry> = BTreeMap::new();
    let mut sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(ln, format!("unterminated section header `{line}`")))?
                .trim()
                .to_string();
            if scenarios::find(&name).is_none() {
                return Err(err(ln, format!("unknown section [{name}]; sections must name a scenario")));
            }
            if sections.contains_key(&name) {
                return Err(err(ln, format!("section [{name}] appears twice")));
            }
            sections.insert(name.clone(), (ln, BTreeMap::new()));
            current = Some(name);
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| err(ln, format!("expected `key = value`, got `{line}`")))?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if k.is_empty() || v.is_empty() {
            return Err(err(ln, format!("empty key or value in `{line}`")));
        }
        let map = match &current {
            Some(s) => &mut sections.get_mut(s).expect("inserted").1,
            None => &mut top,
        };
        if map.contains_key(&k) {
            return Err(err(ln, format!("duplicate key `{k}`")));
        }
        map.insert(k, Entry { line: ln, value: v });
    }

    for (k, e) in &top {
        if !TOP_LEVEL_KEYS.contains(&k.as_str()) {
            return Err(err(
                e.line,
                format!("unknown key `{k}`; top-level keys are {}", TOP_LEVEL_KEYS.join(", ")),
            ));
        }
    }
    let name = top.get("scenario").ok_or_else(|| ConfigError {
        origin: origin.to_string(),
        line: None,
        message: "missing `scenario` key".into(),
    })?;
    let mut cfg = Config::defaults(&name.value).ok_or_else(|| {
        err(
            name.line,
            format!("unknown scenario `{}`; known: {}", name.value, scenarios::names().join(", ")),
        )
    })?;
    if let Some(e) = top.get("seed") {
        cfg.seed = e.value.parse().map_err(|_| err(e.line, format!("seed `{}` is not a u64", e.value)))?;
    }
    if let Some(e) = top.get("n_paths") {
        cfg.n_paths = e
            .value
            .parse()
            .ok()
            .filter(|&n: &usize| n >= 1)
            .ok_or_else(|| err(e.line, format!("n_paths must be an integer >= 1, got `{}`", e.value)))?;
    }
    if let Some(e) = top.get("horizon") {
        cfg.horizon = e
            .value
            .parse()
            .ok()
            .filter(|&h: &f64| h > 0.0 && h.is_finite())
            .ok_or_else(|| err(e.line, format!("horizon must be positive, got `{}`", e.value)))?;
    }
    if let Some(e) = top.get("steps") {
        if cfg.steps.is_none() {
            return Err(err(e.line, format!("{} runs on a graded mesh; set `resolution` instead of `steps`", cfg.scenario.name)));
        }
        cfg.steps = Some(
            e.value
                .parse()
                .ok()
                .filter(|&s: &usize| s >= 1)
                .ok_or_else(|| err(e.line, format!("steps must be an integer >= 1, got `{}`", e.value)))?,
        );
    }
    if let Some(e) = top.get("output_dir") {
        cfg.output_dir = Some(PathBuf::from(&e.value));
    }
    cfg.explicit.extend(TOP_LEVEL_KEYS.iter().filter(|k| top.contains_key(**k)));

    for (sname, (_, entries)) in &sections {
        let info = scenarios::find(sname).expect("checked above");
        for (k, e) in entries {
            let spec = info.params.iter().find(|p| p.key == k).ok_or_else(|| {
                let known: Vec<&str> = info.params.iter().map(|p| p.key).collect();
                err(e.line, format!("unknown key `{k}` in [{sname}]; known keys: {}", known.join(", ")))
            })?;
            check_value(spec.kind, &e.value).map_err(|m| err(e.line, format!("{k}: {m}")))?;
            if sname == cfg.scenario.name {
                cfg.params.insert(spec.key, e.value.clone());
                cfg.explicit.push(spec.key);
            }
        }
    }
    scenarios::check_consistency(&cfg).map_err(|m| ConfigError { origin: origin.to_string(), line: None, message: m })?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse("scenario = hedging\n", "t").unwrap();
        assert_eq!(c.scenario.name, "hedging");
        assert_eq!(c.n_paths, 10_000);
        assert!(c.echo().contains("# default"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse("scenario = hedging\n\n[hedging]\nbogus = 1\n", "cfg").unwrap_err();
        assert_eq!(e.line, Some(4));
        assert!(e.to_string().starts_with("cfg:4:"));
        assert!(e.message.contains("bogus"));
        let e = parse("scenario = nope\n", "cfg").unwrap_err();
        assert_eq!(e.line, Some(1));
        let e = parse("seed = 3\n", "cfg").unwrap_err();
        assert!(e.message.contains("missing"));
        let e = parse("scenario = hedging\nseed = x\n", "cfg").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse("scenario = hedging\nscenario = survival\n", "cfg").unwrap_err();
        assert!(e.message.contains("duplicate"));
    }

    #[test]
    fn comments_and_other_sections() {
        let c = parse(
            "# run\nscenario = survival # inline\nn_paths = 2000\n[hedging]\nt = 0.5\n[survival]\nq_strict = 1\n",
            "t",
        )
        .unwrap();
        assert_eq!(c.n_paths, 2000);
        assert_eq!(c.float("q_strict"), 1.0);
    }

    #[test]
    fn value_ranges_are_checked() {
        let e = parse("scenario = survival\n[survival]\nq_martingale = 2\n", "t").unwrap_err();
        assert_eq!(e.line, Some(3));
    }

    #[test]
    fn graded_scenarios_reject_steps() {
        let e = parse("scenario = levy-tau\nsteps = 10\n", "t").unwrap_err();
        assert!(e.message.contains("resolution"));
    }
}
