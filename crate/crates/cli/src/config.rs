//! Scenario files: flat INI, one `[section]` per component.
//!
//! ```ini
//! [scenario]
//! name = small-data
//! command = small-data-sweep
//! mesh = 64
//!
//! [problem]
//! f = power:alpha=0.6,M=1
//! g = scaled:sine:0.05
//!
//! [sweep]
//! scales = 1, 0.5, 0.25, 0.125
//! ```
//!
//! Parsing never stops at the first problem: every issue is collected with
//! its line number.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use thermovisc::{DiffusionMatrix, MonotoneFlux, Nonlinearity};

#[derive(Clone, Debug, PartialEq)]
pub struct Issue {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub source: String,
    pub issues: Vec<Issue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} configuration issue(s) in {}",
            self.issues.len(),
            self.source
        )?;
        for i in &self.issues {
            write!(f, "\n  {i}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    EpsilonSweep,
    SmallDataSweep,
    UniquenessProbe,
    AuditAll,
}

impl Command {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "solve" => Self::Solve,
            "epsilon-sweep" => Self::EpsilonSweep,
            "small-data-sweep" => Self::SmallDataSweep,
            "uniqueness-probe" => Self::UniquenessProbe,
            "audit-all" => Self::AuditAll,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Solve => "solve",
            Self::EpsilonSweep => "epsilon-sweep",
            Self::SmallDataSweep => "small-data-sweep",
            Self::UniquenessProbe => "uniqueness-probe",
            Self::AuditAll => "audit-all",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Manufactured {
    /// `sin(πx) sin(πy)`.
    Sine,
    /// `x(1−x)y(1−y)`.
    Poly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Base {
    /// `2 sin(πx) sin(πy)` (unit L² norm).
    Sine,
    /// The constant 1 (unit L² norm).
    One,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GSpec {
    Manufactured(Manufactured),
    Scaled { base: Base, factor: f64 },
    File(PathBuf),
}

impl GSpec {
    fn parse(s: &str, dir: &Path) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        match parts.as_slice() {
            ["manufactured", "sine"] => Ok(Self::Manufactured(Manufactured::Sine)),
            ["manufactured", "poly"] => Ok(Self::Manufactured(Manufactured::Poly)),
            ["manufactured", other] => Err(format!("unknown manufactured case `{other}`")),
            ["scaled", base, factor] => {
                let base = match *base {
                    "sine" => Base::Sine,
                    "one" => Base::One,
                    other => return Err(format!("unknown g base `{other}`")),
                };
                let factor: f64 = factor
                    .parse()
                    .map_err(|_| format!("bad scale factor `{factor}`"))?;
                if !factor.is_finite() {
                    return Err(format!("scale factor must be finite, got {factor}"));
                }
                Ok(Self::Scaled { base, factor })
            }
            ["scaled", ..] => Err(format!("expected scaled:<sine|one>:<factor>, got `{s}`")),
            _ if s.is_empty() => Err("empty g spec".into()),
            _ => Ok(Self::File(dir.join(s))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    Zero,
    Plus,
    Minus,
    Random,
    Large,
}

impl Init {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "zero" => Self::Zero,
            "plus" => Self::Plus,
            "minus" => Self::Minus,
            "random" => Self::Random,
            "large" => Self::Large,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct AuditOptions {
    pub p: f64,
    pub q: f64,
    pub c1: f64,
    /// Amplitude and cap of the near-singular source.
    pub amplitude: f64,
    pub cap: f64,
    /// Cap of the second family member in the comparison-slack table.
    pub comparison_cap: f64,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Scenario {
    pub name: String,
    pub command: Command,
    pub mesh: usize,
    /// Refinement levels for convergence studies and audits.
    pub meshes: Vec<usize>,
    pub lambda: f64,
    pub mu: f64,
    pub flux: String,
    pub f: String,
    #[serde(rename = "A")]
    pub a: String,
    pub g: GSpec,
    /// Lower bound below which `f` is switched off.
    pub r0: Option<f64>,
    pub relaxation: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub epsilons: Vec<f64>,
    pub scales: Vec<f64>,
    pub inits: Vec<Init>,
    pub init_amplitude: f64,
    /// Factors applied to `g` for the decay part of the uniqueness chain.
    pub chain_scales: Vec<f64>,
    pub ks: Vec<f64>,
    pub ns: Vec<f64>,
    pub audit: AuditOptions,
}

/// Section → key → (line, raw value).
type Sections = BTreeMap<String, BTreeMap<String, (usize, String)>>;

/// Drops a `#` or `;` comment that starts the line or follows whitespace.
fn strip_comment(line: &str) -> &str {
    let mut prev_space = true;
    for (i, c) in line.char_indices() {
        if (c == '#' || c == ';') && prev_space {
            return &line[..i];
        }
        prev_space = c.is_whitespace();
    }
    line
}

fn parse_ini(text: &str, issues: &mut Vec<Issue>) -> Sections {
    let mut sections = Sections::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = strip_comment(raw).trim();
        if s.is_empty() {
            continue;
        }
        if let Some(name) = s.strip_prefix('[') {
            match name.strip_suffix(']') {
                Some(name) if !name.trim().is_empty() => {
                    let name = name.trim().to_string();
                    sections.entry(name.clone()).or_default();
                    current = Some(name);
                }
                _ => issues.push(Issue {
                    line: Some(line),
                    message: format!("malformed section header `{s}`"),
                }),
            }
            continue;
        }
        let Some((k, v)) = s.split_once('=') else {
            issues.push(Issue {
                line: Some(line),
                message: format!("expected `key = value`, got `{s}`"),
            });
            continue;
        };
        let Some(sec) = &current else {
            issues.push(Issue {
                line: Some(line),
                message: format!("key `{}` outside any section", k.trim()),
            });
            continue;
        };
        let v = v.trim().trim_matches('"').to_string();
        let entry = sections.get_mut(sec).expect("section exists");
        if let Some((first, _)) = entry.insert(k.trim().to_string(), (line, v)) {
            issues.push(Issue {
                line: Some(line),
                message: format!("duplicate key `{}` (first set on line {first})", k.trim()),
            });
        }
    }
    sections
}

const KNOWN: &[(&str, &[&str])] = &[
    ("scenario", &["name", "command", "mesh", "meshes"]),
    ("problem", &["lambda", "mu", "flux", "f", "A", "g", "r0"]),
    ("solver", &["relaxation", "tol", "max_iters"]),
    (
        "sweep",
        &[
            "epsilons",
            "scales",
            "inits",
            "init_amplitude",
            "chain_scales",
        ],
    ),
    ("diagnostics", &["K", "n"]),
    (
        "audit",
        &["p", "q", "C1", "amplitude", "cap", "comparison_cap"],
    ),
];

struct Reader<'a> {
    sections: &'a Sections,
    issues: Vec<Issue>,
}

impl<'a> Reader<'a> {
    fn raw(&self, sec: &str, key: &str) -> Option<(usize, &'a str)> {
        let sections: &'a Sections = self.sections;
        sections
            .get(sec)
            .and_then(|s| s.get(key))
            .map(|(l, v)| (*l, v.as_str()))
    }

    fn line(&self, sec: &str, key: &str) -> Option<usize> {
        self.raw(sec, key).map(|(l, _)| l)
    }

    fn push(&mut self, line: Option<usize>, message: String) {
        self.issues.push(Issue { line, message });
    }

    fn string(&mut self, sec: &str, key: &str, default: Option<&str>) -> Option<String> {
        match self.raw(sec, key) {
            Some((_, v)) => Some(v.to_string()),
            None if default.is_some() => default.map(str::to_string),
            None => {
                self.push(None, format!("missing required key `{key}` in [{sec}]"));
                None
            }
        }
    }

    fn parsed<V: std::str::FromStr>(&mut self, sec: &str, key: &str, default: V) -> V {
        match self.raw(sec, key) {
            None => default,
            Some((line, v)) => match v.parse() {
                Ok(x) => x,
                Err(_) => {
                    self.push(Some(line), format!("`{key}`: cannot parse `{v}`"));
                    default
                }
            },
        }
    }

    fn list<V: std::str::FromStr + Clone>(
        &mut self,
        sec: &str,
        key: &str,
        default: &[V],
    ) -> Vec<V> {
        match self.raw(sec, key) {
            None => default.to_vec(),
            Some((line, v)) => {
                let mut out = Vec::new();
                for tok in v.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                    match tok.parse() {
                        Ok(x) => out.push(x),
                        Err(_) => {
                            self.push(Some(line), format!("`{key}`: cannot parse entry `{tok}`"));
                        }
                    }
                }
                if out.is_empty() {
                    self.push(Some(line), format!("`{key}` must be a nonempty list"));
                }
                out
            }
        }
    }
}

/// Parses and validates scenario text. `dir` anchors relative field paths.
pub fn parse_scenario(text: &str, source: &str, dir: &Path) -> Result<Scenario, ConfigError> {
    let mut issues = Vec::new();
    let sections = parse_ini(text, &mut issues);
    for (sec, keys) in &sections {
        match KNOWN.iter().find(|(s, _)| s == sec) {
            None => issues.push(Issue {
                line: keys.values().map(|(l, _)| *l).min(),
                message: format!("unknown section [{sec}]"),
            }),
            Some((_, known)) => {
                for (k, (line, _)) in keys {
                    if !known.contains(&k.as_str()) {
                        issues.push(Issue {
                            line: Some(*line),
                            message: format!("unknown key `{k}` in [{sec}]"),
                        });
                    }
                }
            }
        }
    }
    let mut r = Reader {
        sections: &sections,
        issues,
    };

    let name = r
        .string("scenario", "name", Some(source))
        .unwrap_or_default();
    let command = match r.string("scenario", "command", None) {
        Some(c) => Command::parse(&c).unwrap_or_else(|| {
            let line = r.line("scenario", "command");
            r.push(line, format!("unknown command `{c}`"));
            Command::Solve
        }),
        None => Command::Solve,
    };
    let mesh: usize = r.parsed("scenario", "mesh", 64);
    let meshes: Vec<usize> = r.list("scenario", "meshes", &[16, 32, 64]);
    for &n in std::iter::once(&mesh).chain(&meshes) {
        if n < 2 {
            let line = r.line("scenario", "mesh");
            r.push(line, format!("mesh sizes must be >= 2, got {n}"));
        }
    }

    let lambda: f64 = r.parsed("problem", "lambda", 1.0);
    let mu: f64 = r.parsed("problem", "mu", 1.0);
    for (key, v) in [("lambda", lambda), ("mu", mu)] {
        if !(v > 0.0) {
            let line = r.line("problem", key);
            r.push(
                line,
                format!("assumption (A5) violated: `{key}` must be > 0, got {v}"),
            );
        }
    }
    let flux = r
        .string("problem", "flux", Some("identity"))
        .unwrap_or_default();
    if let Err(e) = MonotoneFlux::<f64>::from_key(&flux) {
        let line = r.line("problem", "flux");
        r.push(line, format!("flux: {e}"));
    }
    let f = r.string("problem", "f", Some("zero")).unwrap_or_default();
    if let Err(e) = Nonlinearity::<f64>::from_key(&f) {
        let line = r.line("problem", "f");
        r.push(line, format!("f: {e}"));
    }
    let a = r
        .string("problem", "A", Some("identity"))
        .unwrap_or_default();
    if let Err(e) = DiffusionMatrix::<f64>::from_key(&a) {
        let line = r.line("problem", "A");
        r.push(line, format!("A: {e}"));
    }
    let g = match r.string("problem", "g", Some("scaled:one:0")) {
        Some(s) => GSpec::parse(&s, dir).unwrap_or_else(|e| {
            let line = r.line("problem", "g");
            r.push(line, format!("g: {e}"));
            GSpec::Scaled {
                base: Base::One,
                factor: 0.0,
            }
        }),
        None => unreachable!("g has a default"),
    };
    let r0 = match r.raw("problem", "r0") {
        None => None,
        Some((line, v)) => match v.parse::<f64>() {
            Ok(x) if x <= 0.0 => Some(x),
            Ok(x) => {
                r.push(Some(line), format!("`r0` must be <= 0, got {x}"));
                None
            }
            Err(_) => {
                r.push(Some(line), format!("`r0`: cannot parse `{v}`"));
                None
            }
        },
    };

    let relaxation: f64 = r.parsed("solver", "relaxation", 0.5);
    if !(relaxation > 0.0 && relaxation <= 1.0) {
        let line = r.line("solver", "relaxation");
        r.push(
            line,
            format!("`relaxation` must lie in (0, 1], got {relaxation}"),
        );
    }
    let tol: f64 = r.parsed("solver", "tol", 1e-8);
    if !(tol > 0.0) {
        let line = r.line("solver", "tol");
        r.push(line, format!("`tol` must be > 0, got {tol}"));
    }
    let max_iters: usize = r.parsed("solver", "max_iters", 200);

    let epsilons: Vec<f64> = r.list("sweep", "epsilons", &[1.0, 0.1, 0.01]);
    if epsilons.iter().any(|&e| !(e > 0.0)) || epsilons.windows(2).any(|w| !(w[0] > w[1])) {
        let line = r.line("sweep", "epsilons");
        r.push(
            line,
            "`epsilons` must be positive and strictly decreasing".into(),
        );
    }
    let scales: Vec<f64> = r.list("sweep", "scales", &[1.0, 0.5, 0.25, 0.125]);
    if scales.iter().any(|&s| !(s >= 0.0)) {
        let line = r.line("sweep", "scales");
        r.push(line, "`scales` must be nonnegative".into());
    }
    let init_names: Vec<String> = r.list(
        "sweep",
        "inits",
        &["zero", "plus", "minus", "random", "large"].map(String::from),
    );
    let mut inits = Vec::new();
    for s in &init_names {
        match Init::parse(s) {
            Some(i) => inits.push(i),
            None => {
                let line = r.line("sweep", "inits");
                r.push(line, format!("unknown initialization `{s}`"));
            }
        }
    }
    let init_amplitude: f64 = r.parsed("sweep", "init_amplitude", 0.5);
    let chain_scales: Vec<f64> = r.list("sweep", "chain_scales", &[1.0, 0.25, 0.0625]);
    if chain_scales.iter().any(|&s| !(s > 0.0)) {
        let line = r.line("sweep", "chain_scales");
        r.push(line, "`chain_scales` must be positive".into());
    }

    let ks: Vec<f64> = r.list("diagnostics", "K", &[0.5, 1.0, 2.0]);
    let ns: Vec<f64> = r.list("diagnostics", "n", &[2.0, 4.0, 8.0, 16.0]);
    for (key, v) in [("K", &ks), ("n", &ns)] {
        if v.iter().any(|&x| !(x > 0.0)) {
            let line = r.line("diagnostics", key);
            r.push(line, format!("`{key}` levels must be > 0"));
        }
    }

    let audit = AuditOptions {
        p: r.parsed("audit", "p", 1.5),
        q: r.parsed("audit", "q", 4.0),
        c1: r.parsed("audit", "C1", 10.0),
        amplitude: r.parsed("audit", "amplitude", 5.0),
        cap: r.parsed("audit", "cap", 1000.0),
        comparison_cap: r.parsed("audit", "comparison_cap", 30.0),
    };
    if !(audit.p >= 1.0 && audit.p < 2.0) {
        let line = r.line("audit", "p");
        r.push(line, format!("`p` must lie in [1, 2), got {}", audit.p));
    }
    if !(audit.q >= 1.0) {
        let line = r.line("audit", "q");
        r.push(line, format!("`q` must be >= 1, got {}", audit.q));
    }
    if !(audit.c1 > 0.0 && audit.amplitude >= 0.0 && audit.cap > 0.0 && audit.comparison_cap > 0.0)
    {
        r.push(
            None,
            "`C1`, `cap`, `comparison_cap` must be > 0 and `amplitude` >= 0".into(),
        );
    }

    let mut issues = r.issues;
    if !issues.is_empty() {
        issues.sort_by_key(|i| i.line.unwrap_or(usize::MAX));
        return Err(ConfigError {
            source: source.to_string(),
            issues,
        });
    }
    Ok(Scenario {
        name,
        command,
        mesh,
        meshes,
        lambda,
        mu,
        flux,
        f,
        a,
        g,
        r0,
        relaxation,
        tol,
        max_iters,
        epsilons,
        scales,
        inits,
        init_amplitude,
        chain_scales,
        ks,
        ns,
        audit,
    })
}
