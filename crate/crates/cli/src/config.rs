//! Sectioned `key = value` run configuration.
//!
//! ```text
//! # comment
//! [model]
//! id = toy
//! [chain]
//! h1 = 0, 1
//! n = 100000        # or R = 2000
//! ```
//!
//! Every error carries the file name and, where one exists, the line.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use ebsurf::{HyperPoint, HyperRect};
use sha2::{Digest, Sha256};

/// Sections and the keys each accepts.
const SCHEMA: &[(&str, &[&str])] = &[
    ("model", &["id", "y", "sigma0", "proposal_sd", "c", "data", "vocab", "topics", "eps"]),
    ("chain", &["h1", "n", "R", "seed", "trace"]),
    ("rect", &["lower", "upper"]),
    ("grid", &["points", "lower", "upper"]),
    ("inference", &["alpha", "M", "functionals"]),
    (
        "st",
        &[
            "anchors",
            "per_axis",
            "lower",
            "upper",
            "zeta",
            "init",
            "bridge_steps",
            "rounds",
            "steps_per_round",
            "max_ratio",
            "update",
            "kappa",
            "n",
        ],
    ),
    (
        "synth",
        &["kind", "rows", "predictors", "sparsity", "snr", "docs", "vocab", "topics", "doc_length", "eta", "alpha"],
    ),
    ("output", &["dir"]),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.source, l, self.message),
            None => write!(f, "{}: {}", self.source, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Override,
}

#[derive(Debug, Clone)]
pub struct Entry {
    pub value: String,
    pub origin: Origin,
}

#[derive(Debug, Clone, Default)]
struct Section {
    line: Option<usize>,
    entries: BTreeMap<String, Entry>,
}

/// The parsed file before any typing, with line numbers kept for errors.
#[derive(Debug, Clone)]
pub struct RawConfig {
    source: String,
    base: PathBuf,
    sections: BTreeMap<String, Section>,
}

fn known_keys(section: &str) -> Option<&'static [&'static str]> {
    SCHEMA.iter().find(|(s, _)| *s == section).map(|(_, k)| *k)
}

impl RawConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let source = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            source: source.clone(),
            line: None,
            message: format!("cannot read config: {e}"),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &source, base)
    }

    /// Parses `text`; relative paths in it resolve against `base`.
    pub fn parse(text: &str, source: &str, base: PathBuf) -> Result<Self, ConfigError> {
        let mut cfg = Self { source: source.to_string(), base, sections: BTreeMap::new() };
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let no = i + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name =
                    rest.strip_suffix(']').ok_or_else(|| cfg.err(Some(no), "section header must end with `]`"))?.trim();
                if known_keys(name).is_none() {
                    return Err(cfg.err(Some(no), format!("unknown section [{name}]")));
                }
                if let Some(prev) = cfg.sections.get(name).and_then(|s| s.line) {
                    return Err(cfg.err(Some(no), format!("section [{name}] already opened on line {prev}")));
                }
                cfg.sections.entry(name.to_string()).or_default().line = Some(no);
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| cfg.err(Some(no), format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let section =
                current.clone().ok_or_else(|| cfg.err(Some(no), format!("key `{key}` appears before any section")))?;
            cfg.insert(&section, key, value, Origin::Line(no))?;
        }
        Ok(cfg)
    }

    fn insert(&mut self, section: &str, key: &str, value: &str, origin: Origin) -> Result<(), ConfigError> {
        let line = match origin {
            Origin::Line(l) => Some(l),
            Origin::Override => None,
        };
        let keys = known_keys(section).ok_or_else(|| self.err(line, format!("unknown section [{section}]")))?;
        if !keys.contains(&key) {
            return Err(
                self.err(line, format!("unknown key `{key}` in [{section}]; expected one of {}", keys.join(", ")))
            );
        }
        if value.is_empty() {
            return Err(self.err(line, format!("`{key}` has an empty value")));
        }
        let entries = &mut self.sections.entry(section.to_string()).or_default().entries;
        if let (Origin::Line(_), Some(Entry { origin: Origin::Line(prev), .. })) = (origin, entries.get(key)) {
            let prev = *prev;
            return Err(self.err(line, format!("`{key}` already set on line {prev}")));
        }
        entries.insert(key.to_string(), Entry { value: value.to_string(), origin });
        Ok(())
    }

    /// Applies a `section.key=value` override from the command line.
    pub fn set(&mut self, spec: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError {
            source: "--set".into(),
            line: None,
            message: format!("expected `section.key=value`, got `{spec}`"),
        };
        let (path, value) = spec.split_once('=').ok_or_else(bad)?;
        let (section, key) = path.trim().split_once('.').ok_or_else(bad)?;
        self.insert(section.trim(), key.trim(), value.trim(), Origin::Override)
    }

    /// Drops an entry, e.g. `[chain] n` when a flag switches to `R`.
    pub fn remove(&mut self, section: &str, key: &str) {
        if let Some(sec) = self.sections.get_mut(section) {
            sec.entries.remove(key);
        }
    }

    pub fn err(&self, line: Option<usize>, message: impl Into<String>) -> ConfigError {
        ConfigError { source: self.source.clone(), line, message: message.into() }
    }

    fn err_at(&self, entry: &Entry, key: &str, message: impl fmt::Display) -> ConfigError {
        match entry.origin {
            Origin::Line(l) => self.err(Some(l), format!("`{key}`: {message}")),
            Origin::Override => {
                ConfigError { source: "--set".into(), line: None, message: format!("`{key}`: {message}") }
            }
        }
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section)?.entries.get(key)
    }

    fn missing(&self, section: &str, key: &str) -> ConfigError {
        let line = self.sections.get(section).and_then(|s| s.line);
        match line {
            Some(_) => self.err(line, format!("[{section}] is missing required key `{key}`")),
            None => self.err(None, format!("missing [{section}] section with key `{key}`")),
        }
    }

    fn parsed<T>(
        &self,
        section: &str,
        key: &str,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, ConfigError> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => parse(&e.value).map(Some).map_err(|m| self.err_at(e, key, m)),
        }
    }

    pub fn string(&self, section: &str, key: &str) -> Option<String> {
        self.entry(section, key).map(|e| e.value.clone())
    }

    pub fn require_string(&self, section: &str, key: &str) -> Result<String, ConfigError> {
        self.string(section, key).ok_or_else(|| self.missing(section, key))
    }

    pub fn path(&self, section: &str, key: &str) -> Option<PathBuf> {
        self.string(section, key).map(|p| {
            let p = PathBuf::from(p);
            if p.is_relative() {
                self.base.join(p)
            } else {
                p
            }
        })
    }

    pub fn f64(&self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        self.parsed(section, key, parse_f64)
    }

    pub fn require_f64(&self, section: &str, key: &str) -> Result<f64, ConfigError> {
        self.f64(section, key)?.ok_or_else(|| self.missing(section, key))
    }

    pub fn usize(&self, section: &str, key: &str) -> Result<Option<usize>, ConfigError> {
        self.parsed(section, key, |s| {
            s.parse::<usize>().map_err(|_| format!("expected a non-negative integer, got `{s}`"))
        })
    }

    pub fn require_usize(&self, section: &str, key: &str) -> Result<usize, ConfigError> {
        self.usize(section, key)?.ok_or_else(|| self.missing(section, key))
    }

    pub fn u64(&self, section: &str, key: &str) -> Result<Option<u64>, ConfigError> {
        self.parsed(section, key, |s| {
            s.parse::<u64>().map_err(|_| format!("expected a non-negative integer, got `{s}`"))
        })
    }

    pub fn floats(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.parsed(section, key, |s| s.split(',').map(|x| parse_f64(x.trim())).collect())
    }

    pub fn require_floats(&self, section: &str, key: &str) -> Result<Vec<f64>, ConfigError> {
        self.floats(section, key)?.ok_or_else(|| self.missing(section, key))
    }

    /// Points separated by `;`, coordinates by `,`.
    pub fn points(&self, section: &str, key: &str) -> Result<Option<Vec<Vec<f64>>>, ConfigError> {
        self.parsed(section, key, |s| {
            s.split(';').map(|p| p.split(',').map(|x| parse_f64(x.trim())).collect()).collect()
        })
    }

    pub fn usizes(&self, section: &str, key: &str) -> Result<Option<Vec<usize>>, ConfigError> {
        self.parsed(section, key, |s| {
            s.split(',')
                .map(|x| x.trim().parse::<usize>().map_err(|_| format!("expected integers, got `{x}`")))
                .collect()
        })
    }

    pub fn names(&self, section: &str, key: &str) -> Option<Vec<String>> {
        self.string(section, key)
            .map(|s| s.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect())
    }

    /// Error pointing at `section.key` if present, else at the section header.
    pub fn err_key(&self, section: &str, key: &str, message: impl fmt::Display) -> ConfigError {
        match self.entry(section, key) {
            Some(e) => self.err_at(e, key, message),
            None => self.err(self.sections.get(section).and_then(|s| s.line), message.to_string()),
        }
    }

    /// SHA-256 over the sorted `section.key=value` pairs. The output directory
    /// is left out so relocating outputs keeps the hash.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (name, section) in &self.sections {
            for (key, entry) in &section.entries {
                if name == "output" {
                    continue;
                }
                h.update(format!("{name}.{key}={}\n", entry.value).as_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Drops a whole-line comment, or a `#` preceded by whitespace.
fn strip_comment(line: &str) -> &str {
    if line.trim_start().starts_with('#') {
        return "";
    }
    let bytes = line.as_bytes();
    for i in 1..bytes.len() {
        if bytes[i] == b'#' && bytes[i - 1].is_ascii_whitespace() {
            return &line[..i];
        }
    }
    line
}

fn parse_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("expected a finite number, got `{s}`")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelId {
    /// Exact iid draws from the toy posterior.
    Toy,
    /// Independence Metropolis-Hastings on the toy posterior.
    ToyImh,
    Vs,
    Lda,
}

impl ModelId {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "toy" => Some(Self::Toy),
            "toy-imh" => Some(Self::ToyImh),
            "vs" => Some(Self::Vs),
            "lda" => Some(Self::Lda),
            _ => None,
        }
    }

    pub fn is_toy(self) -> bool {
        matches!(self, Self::Toy | Self::ToyImh)
    }
}

#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub id: ModelId,
    pub y: Vec<f64>,
    pub sigma0: f64,
    pub proposal_sd: f64,
    /// IMH regeneration constant; a pilot run picks it when unset.
    pub c: Option<f64>,
    pub data: Option<PathBuf>,
    pub vocab: Option<usize>,
    pub topics: usize,
    pub eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Length {
    Steps(usize),
    Regenerations(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZetaInit {
    Flat,
    Bridge,
}

#[derive(Debug, Clone)]
pub struct StConfig {
    /// Explicit anchors; otherwise a lattice of `per_axis` points.
    pub anchors: Option<Vec<HyperPoint>>,
    pub per_axis: Vec<usize>,
    pub rect: Option<HyperRect>,
    pub zeta: Option<PathBuf>,
    pub init: ZetaInit,
    pub bridge_steps: usize,
    pub rounds: usize,
    pub steps_per_round: usize,
    pub max_ratio: f64,
    /// `None` tunes by marginal estimates, `Some(kappa)` by occupancy.
    pub kappa: Option<f64>,
    pub n: Option<usize>,
}

#[derive(Debug, Clone)]
pub enum SynthConfig {
    Regression { rows: usize, predictors: usize, sparsity: usize, snr: f64 },
    Corpus { docs: usize, vocab: usize, topics: usize, doc_length: usize, eta: f64, alpha: f64 },
}

/// Typed configuration. Sections a command does not need may be absent;
/// the `require_*` accessors report what is missing.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub model: Option<ModelConfig>,
    pub h1: Option<Vec<f64>>,
    pub length: Option<Length>,
    pub trace: Option<PathBuf>,
    pub rect: Option<HyperRect>,
    pub grid: Option<Vec<HyperPoint>>,
    pub batches: Option<usize>,
    pub alpha: f64,
    pub functionals: Option<Vec<String>>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub st: Option<StConfig>,
    pub synth: Option<SynthConfig>,
    pub hash: String,
}

fn rect_from(raw: &RawConfig, section: &str) -> Result<Option<HyperRect>, ConfigError> {
    let lower = raw.floats(section, "lower")?;
    let upper = raw.floats(section, "upper")?;
    match (lower, upper) {
        (None, None) => Ok(None),
        (Some(_), None) => Err(raw.missing(section, "upper")),
        (None, Some(_)) => Err(raw.missing(section, "lower")),
        (Some(l), Some(u)) => HyperRect::new(l, u).map(Some).map_err(|e| raw.err_key(section, "upper", e)),
    }
}

fn per_axis(raw: &RawConfig, section: &str, key: &str, dim: usize, default: usize) -> Result<Vec<usize>, ConfigError> {
    let pts = raw.usizes(section, key)?.unwrap_or_else(|| vec![default]);
    let pts = match pts.len() {
        1 => vec![pts[0]; dim],
        l if l == dim => pts,
        l => return Err(raw.err_key(section, key, format!("need 1 or {dim} counts, got {l}"))),
    };
    if pts.contains(&0) {
        return Err(raw.err_key(section, key, "counts must be positive"));
    }
    Ok(pts)
}

impl RunConfig {
    /// Types and validates a raw configuration. `env_out` overrides `[output] dir`.
    pub fn from_raw(raw: RawConfig, env_out: Option<PathBuf>) -> Result<Self, ConfigError> {
        let model = match raw.has_section("model") {
            false => None,
            true => {
                let id_s = raw.require_string("model", "id")?;
                let id = ModelId::parse(&id_s).ok_or_else(|| {
                    raw.err_key("model", "id", format!("unknown model `{id_s}`; expected toy, toy-imh, vs or lda"))
                })?;
                let y = raw.floats("model", "y")?.unwrap_or_else(|| vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
                let sigma0 = raw.f64("model", "sigma0")?.unwrap_or(1.0);
                let proposal_sd = raw.f64("model", "proposal_sd")?.unwrap_or(ebsurf::models::toy::TOY_PROPOSAL_SD);
                if !(sigma0 > 0.0) || !(proposal_sd > 0.0) {
                    return Err(raw.err_key("model", "sigma0", "sigma0 and proposal_sd must be positive"));
                }
                let c = raw.f64("model", "c")?;
                if c.is_some_and(|c| !(c > 0.0)) {
                    return Err(raw.err_key("model", "c", "must be positive"));
                }
                let data = raw.path("model", "data");
                if matches!(id, ModelId::Vs | ModelId::Lda) && data.is_none() {
                    return Err(raw.missing("model", "data"));
                }
                let vocab = raw.usize("model", "vocab")?;
                if id == ModelId::Lda && vocab.is_none() {
                    return Err(raw.missing("model", "vocab"));
                }
                let topics = raw.usize("model", "topics")?.unwrap_or(2);
                if topics == 0 {
                    return Err(raw.err_key("model", "topics", "must be positive"));
                }
                let eps = raw.f64("model", "eps")?.unwrap_or(0.05);
                Some(ModelConfig { id, y, sigma0, proposal_sd, c, data, vocab, topics, eps })
            }
        };

        let h1 = raw.floats("chain", "h1")?;
        let n = raw.usize("chain", "n")?;
        let r = raw.usize("chain", "R")?;
        let trace = raw.path("chain", "trace");
        let length = match (n, r) {
            (Some(_), Some(_)) => return Err(raw.err_key("chain", "R", "set exactly one of `n` and `R`")),
            (Some(0), _) | (_, Some(0)) => {
                return Err(raw.err_key("chain", if n.is_some() { "n" } else { "R" }, "must be positive"))
            }
            (Some(n), None) => Some(Length::Steps(n)),
            (None, Some(r)) => Some(Length::Regenerations(r)),
            (None, None) => None,
        };
        if trace.is_some() && length.is_some() {
            return Err(raw.err_key("chain", "trace", "a stored trace replaces `n`/`R`; set only one"));
        }
        if let (Some(m), Some(Length::Regenerations(_))) = (&model, length) {
            if matches!(m.id, ModelId::Vs | ModelId::Lda) {
                return Err(raw.err_key("chain", "R", "this model has no regeneration marks; set `n`"));
            }
        }
        let seed = raw.u64("chain", "seed")?.unwrap_or(0);

        let rect = rect_from(&raw, "rect")?;
        if let (Some(rect), Some(h1)) = (&rect, &h1) {
            if h1.len() != rect.dim() {
                return Err(raw.err_key("chain", "h1", format!("needs {} coordinates", rect.dim())));
            }
        }
        let grid = match &rect {
            None => {
                if raw.has_section("grid") {
                    return Err(raw.err(None, "[grid] needs a [rect] section"));
                }
                None
            }
            Some(rect) => {
                let dim = rect.dim();
                let sub = rect_from(&raw, "grid")?.unwrap_or_else(|| rect.clone());
                if sub.dim() != dim {
                    return Err(raw.err_key(
                        "grid",
                        "lower",
                        format!("grid has {} coordinates, rect has {dim}", sub.dim()),
                    ));
                }
                let inside = sub
                    .lower()
                    .iter()
                    .zip(sub.upper())
                    .zip(rect.lower().iter().zip(rect.upper()))
                    .all(|((gl, gu), (rl, ru))| gl >= rl && gu <= ru);
                if !inside {
                    return Err(raw.err_key("grid", "lower", "grid must lie within the rect"));
                }
                let pts = per_axis(&raw, "grid", "points", dim, 21)?;
                Some(sub.grid(&pts))
            }
        };

        let batches = raw.usize("inference", "M")?;
        if batches.is_some_and(|m| m < 2) {
            return Err(raw.err_key("inference", "M", "need at least two batches"));
        }
        let alpha = raw.f64("inference", "alpha")?.unwrap_or(0.05);
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(raw.err_key("inference", "alpha", format!("must lie in (0, 1), got {alpha}")));
        }
        let functionals = raw.names("inference", "functionals");

        let st = match raw.has_section("st") {
            false => None,
            true => {
                let st_rect = rect_from(&raw, "st")?;
                let dim = st_rect.as_ref().or(rect.as_ref()).map_or(2, HyperRect::dim);
                let init = match raw.string("st", "init").as_deref() {
                    None | Some("flat") => ZetaInit::Flat,
                    Some("bridge") => ZetaInit::Bridge,
                    Some(other) => {
                        return Err(raw.err_key("st", "init", format!("expected flat or bridge, got `{other}`")))
                    }
                };
                let kappa = match raw.string("st", "update").as_deref() {
                    None | Some("occupancy") => Some(raw.f64("st", "kappa")?.unwrap_or(0.5)),
                    Some("marginal") => None,
                    Some(other) => {
                        return Err(raw.err_key(
                            "st",
                            "update",
                            format!("expected occupancy or marginal, got `{other}`"),
                        ))
                    }
                };
                let max_ratio = raw.f64("st", "max_ratio")?.unwrap_or(2.0);
                if !(max_ratio > 1.0) {
                    return Err(raw.err_key("st", "max_ratio", "must exceed 1"));
                }
                let anchors = raw.points("st", "anchors")?;
                if let Some(a) = &anchors {
                    if a.iter().any(|p| p.len() != dim) {
                        return Err(raw.err_key("st", "anchors", format!("every anchor needs {dim} coordinates")));
                    }
                }
                Some(StConfig {
                    anchors,
                    per_axis: per_axis(&raw, "st", "per_axis", dim, 3)?,
                    rect: st_rect,
                    zeta: raw.path("st", "zeta"),
                    init,
                    bridge_steps: raw.usize("st", "bridge_steps")?.unwrap_or(5000),
                    rounds: raw.usize("st", "rounds")?.unwrap_or(20),
                    steps_per_round: raw.usize("st", "steps_per_round")?.unwrap_or(10_000),
                    max_ratio,
                    kappa,
                    n: raw.usize("st", "n")?,
                })
            }
        };

        let synth = match raw.has_section("synth") {
            false => None,
            true => match raw.require_string("synth", "kind")?.as_str() {
                "regression" => Some(SynthConfig::Regression {
                    rows: raw.usize("synth", "rows")?.unwrap_or(100),
                    predictors: raw.usize("synth", "predictors")?.unwrap_or(8),
                    sparsity: raw.usize("synth", "sparsity")?.unwrap_or(3),
                    snr: raw.f64("synth", "snr")?.unwrap_or(2.0),
                }),
                "corpus" => Some(SynthConfig::Corpus {
                    docs: raw.usize("synth", "docs")?.unwrap_or(6),
                    vocab: raw.usize("synth", "vocab")?.unwrap_or(12),
                    topics: raw.usize("synth", "topics")?.unwrap_or(2),
                    doc_length: raw.usize("synth", "doc_length")?.unwrap_or(30),
                    eta: raw.f64("synth", "eta")?.unwrap_or(0.5),
                    alpha: raw.f64("synth", "alpha")?.unwrap_or(0.5),
                }),
                other => {
                    return Err(raw.err_key("synth", "kind", format!("expected regression or corpus, got `{other}`")))
                }
            },
        };

        let out_dir = env_out.or_else(|| raw.path("output", "dir")).unwrap_or_else(|| PathBuf::from("ebsurf-out"));
        let hash = raw.hash();
        Ok(Self {
            raw,
            model,
            h1,
            length,
            trace,
            rect,
            grid,
            batches,
            alpha,
            functionals,
            seed,
            out_dir,
            st,
            synth,
            hash,
        })
    }

    pub fn require_model(&self) -> Result<&ModelConfig, ConfigError> {
        self.model.as_ref().ok_or_else(|| self.raw.missing("model", "id"))
    }

    pub fn require_rect(&self) -> Result<&HyperRect, ConfigError> {
        self.rect.as_ref().ok_or_else(|| self.raw.missing("rect", "lower"))
    }

    pub fn require_grid(&self) -> Result<&[HyperPoint], ConfigError> {
        self.require_rect()?;
        Ok(self.grid.as_deref().unwrap_or_default())
    }

    pub fn require_st(&self) -> Result<&StConfig, ConfigError> {
        self.st.as_ref().ok_or_else(|| self.raw.err(None, "missing [st] section"))
    }

    pub fn require_h1(&self) -> Result<&[f64], ConfigError> {
        self.h1.as_deref().ok_or_else(|| self.raw.missing("chain", "h1"))
    }

    /// Chain length when a chain must be run here rather than loaded.
    pub fn require_length(&self) -> Result<Length, ConfigError> {
        self.length.ok_or_else(|| self.raw.err_key("chain", "n", "set `n` or `R` (or `trace` to reuse a stored chain)"))
    }

    pub fn err_key(&self, section: &str, key: &str, message: impl fmt::Display) -> ConfigError {
        self.raw.err_key(section, key, message)
    }
}
