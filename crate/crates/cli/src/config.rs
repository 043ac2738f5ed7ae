//! Sectioned `key = value` scenario files.
//!
//! ```text
//! [system]
//! n = 2
//! j = 1, -1
//!
//! [flow]
//! order = 3
//! f = 0, 0, 0, 1
//! ```
//!
//! Complex values are written `a+bi`, lists are comma separated and `#`
//! starts a comment.

use std::collections::BTreeMap;
use std::fmt;

use nisakns_core::soliton::{mkdv_flow, mkdv_generator, SolitonSpec};
use nisakns_core::{
    DiagonalGenerator, FieldGrid, Grid, IntegralConstants, SpectralPolynomial, SquareMatrix, C64,
};

/// One problem found while loading a scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

/// Every diagnostic collected for one scenario file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<Diagnostic>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    Zero,
    /// `P_ij = a_ij exp(-((x - centre) / width)^2)` for `i != j`.
    Gaussian {
        amplitude: Vec<C64>,
        centre: f64,
        width: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Seeding {
    /// MKdV seed with `λ0(0) = -κ0^{-1/2}` and mirrored mixing.
    Mkdv {
        kappa0: f64,
        c0: f64,
        t_window: (f64, f64),
        second_lambda: Option<f64>,
        second_c: f64,
    },
    /// Zero seed of the configured system dressed at `lambda` with one
    /// mixing vector per spectral value.
    Generic {
        lambda: Vec<C64>,
        mixing: Vec<Vec<C64>>,
    },
}

/// Thresholds for the `verify` checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckTolerances {
    pub algebraic: f64,
    pub recurrence: f64,
    pub constants: f64,
    pub similarity: f64,
    pub zero_curvature: f64,
    pub governing: f64,
    pub edge: f64,
    pub rate_relative: f64,
    pub dual_route: f64,
    pub mkdv_recurrence: f64,
    pub reduction: f64,
    pub order_min: f64,
    pub order_max: f64,
}

impl Default for CheckTolerances {
    fn default() -> Self {
        Self {
            algebraic: 1e-12,
            recurrence: 1e-8,
            constants: 1e-6,
            similarity: 1e-8,
            zero_curvature: 1e-1,
            governing: 1e-8,
            edge: 1e-8,
            rate_relative: 0.1,
            dual_route: 1e-10,
            mkdv_recurrence: 1e-1,
            reduction: 1e-10,
            order_min: 1.8,
            order_max: 2.2,
        }
    }
}

const TOLERANCE_KEYS: [&str; 13] = [
    "algebraic",
    "recurrence",
    "constants",
    "similarity",
    "zero_curvature",
    "governing",
    "edge",
    "rate_relative",
    "dual_route",
    "mkdv_recurrence",
    "reduction",
    "order_min",
    "order_max",
];

impl CheckTolerances {
    fn slot(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "algebraic" => &mut self.algebraic,
            "recurrence" => &mut self.recurrence,
            "constants" => &mut self.constants,
            "similarity" => &mut self.similarity,
            "zero_curvature" => &mut self.zero_curvature,
            "governing" => &mut self.governing,
            "edge" => &mut self.edge,
            "rate_relative" => &mut self.rate_relative,
            "dual_route" => &mut self.dual_route,
            "mkdv_recurrence" => &mut self.mkdv_recurrence,
            "reduction" => &mut self.reduction,
            "order_min" => &mut self.order_min,
            "order_max" => &mut self.order_max,
            _ => return None,
        })
    }

    fn get(&self, key: &str) -> f64 {
        let mut copy = *self;
        *copy.slot(key).expect("known tolerance key")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub j: Vec<C64>,
    pub order: usize,
    pub f: Vec<C64>,
    /// Diagonals of `α_0..α_order`.
    pub alphas: Vec<Vec<C64>>,
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub t: Vec<f64>,
    pub potential: PotentialKind,
    pub seeding: Option<Seeding>,
    pub tolerances: CheckTolerances,
    pub directory: String,
    pub formats: Vec<Format>,
}

const SECTIONS: [&str; 8] = [
    "system",
    "flow",
    "constants",
    "grid",
    "potential",
    "darboux",
    "tolerances",
    "output",
];

fn section_keys(section: &str) -> &'static [&'static str] {
    match section {
        "system" => &["n", "j"],
        "flow" => &["order", "f"],
        "grid" => &["x_min", "x_max", "nx", "t"],
        "potential" => &["kind", "amplitude", "centre", "width"],
        "darboux" => &[
            "kappa0",
            "c0",
            "t_window",
            "second_lambda",
            "second_c",
            "lambda",
        ],
        "tolerances" => &TOLERANCE_KEYS,
        "output" => &["directory", "formats"],
        _ => &[],
    }
}

#[derive(Debug)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Default)]
struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

fn nearest<'a>(word: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    candidates
        .into_iter()
        .map(|c| (strsim::levenshtein(word, c), c))
        .min()
        .filter(|(d, c)| *d <= 3.max(c.len() / 2))
        .map(|(_, c)| c)
}

fn suggestion(word: &str, candidates: Vec<String>) -> String {
    match nearest(word, candidates.iter().map(String::as_str)) {
        Some(c) => format!("; did you mean `{c}`?"),
        None => String::new(),
    }
}

/// Allowed keys of a section. `constants` and the mixing vectors are
/// indexed, so their key lists depend on the rest of the file.
fn allowed_keys(section: &str, order: usize, n: usize) -> Vec<String> {
    match section {
        "constants" => (0..=order).map(|i| format!("alpha_{i}")).collect(),
        "darboux" => section_keys(section)
            .iter()
            .map(|k| k.to_string())
            .chain((1..=n.max(1)).map(|k| format!("mixing_{k}")))
            .collect(),
        s => section_keys(s).iter().map(|k| k.to_string()).collect(),
    }
}

fn lex(text: &str, diags: &mut Vec<Diagnostic>) -> BTreeMap<String, Section> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                diags.push(Diagnostic {
                    line: Some(line),
                    message: format!("malformed section header `{content}`"),
                });
                current = None;
                continue;
            };
            let name = name.trim().to_string();
            if !SECTIONS.contains(&name.as_str()) {
                diags.push(Diagnostic {
                    line: Some(line),
                    message: format!(
                        "unknown section `[{name}]`{}",
                        suggestion(&name, SECTIONS.iter().map(|s| s.to_string()).collect())
                    ),
                });
                current = None;
                continue;
            }
            if sections.contains_key(&name) {
                diags.push(Diagnostic {
                    line: Some(line),
                    message: format!("section `[{name}]` appears twice"),
                });
            }
            sections.entry(name.clone()).or_insert(Section {
                line,
                entries: BTreeMap::new(),
            });
            current = Some(name);
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            diags.push(Diagnostic {
                line: Some(line),
                message: format!("expected `key = value`, found `{content}`"),
            });
            continue;
        };
        let Some(section) = current.as_ref() else {
            diags.push(Diagnostic {
                line: Some(line),
                message: "key outside of any section".into(),
            });
            continue;
        };
        let key = key.trim().to_string();
        let entries = &mut sections.get_mut(section).expect("current section").entries;
        if let Some(previous) = entries.get(&key) {
            diags.push(Diagnostic {
                line: Some(line),
                message: format!(
                    "duplicate key `{key}` (first set on line {})",
                    previous.line
                ),
            });
            continue;
        }
        entries.insert(
            key,
            Entry {
                value: value.trim().to_string(),
                line,
            },
        );
    }
    sections
}

/// Parses `a`, `bi`, `a+bi` or `a-bi`.
pub fn parse_complex(s: &str) -> Option<C64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return None;
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().ok().map(|re| C64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |t: &str| -> Option<f64> {
        match t {
            "" | "+" => Some(1.0),
            "-" => Some(-1.0),
            t => t.parse().ok(),
        }
    };
    match split {
        Some(k) => Some(C64::new(body[..k].parse().ok()?, imag(&body[k..])?)),
        None => Some(C64::new(0.0, imag(body)?)),
    }
}

fn format_real(v: f64) -> String {
    format!("{v}")
}

pub fn format_complex(z: C64) -> String {
    if z.im == 0.0 {
        format_real(z.re)
    } else if z.re == 0.0 {
        format!("{}i", z.im)
    } else if z.im < 0.0 || (z.im == 0.0 && z.im.is_sign_negative()) {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(", ")
}

struct Reader<'a> {
    sections: &'a BTreeMap<String, Section>,
    diags: &'a mut Vec<Diagnostic>,
}

impl Reader<'_> {
    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|s| s.entries.get(key))
    }

    fn line(&self, section: &str, key: &str) -> Option<usize> {
        self.entry(section, key)
            .map(|e| e.line)
            .or_else(|| self.sections.get(section).map(|s| s.line))
    }

    fn error(&mut self, line: Option<usize>, message: String) {
        self.diags.push(Diagnostic { line, message });
    }

    fn required(&mut self, section: &str, key: &str) -> Option<String> {
        match self.entry(section, key) {
            Some(e) => Some(e.value.clone()),
            None => {
                let line = self.sections.get(section).map(|s| s.line);
                self.error(line, format!("[{section}] is missing required key `{key}`"));
                None
            }
        }
    }

    fn parse<T>(
        &mut self,
        section: &str,
        key: &str,
        raw: &str,
        what: &str,
        f: impl Fn(&str) -> Option<T>,
    ) -> Option<T> {
        match f(raw.trim()) {
            Some(v) => Some(v),
            None => {
                let line = self.line(section, key);
                self.error(line, format!("`{key}`: expected {what}, found `{raw}`"));
                None
            }
        }
    }

    fn real(&mut self, section: &str, key: &str) -> Option<f64> {
        let raw = self.required(section, key)?;
        self.parse(section, key, &raw, "a real number", |s| {
            s.parse::<f64>().ok().filter(|v| v.is_finite())
        })
    }

    fn optional_real(&mut self, section: &str, key: &str) -> Option<Option<f64>> {
        match self.entry(section, key) {
            None => Some(None),
            Some(_) => self.real(section, key).map(Some),
        }
    }

    fn count(&mut self, section: &str, key: &str) -> Option<usize> {
        let raw = self.required(section, key)?;
        self.parse(section, key, &raw, "a non-negative integer", |s| {
            s.parse::<usize>().ok()
        })
    }

    fn complex_list(&mut self, section: &str, key: &str) -> Option<Vec<C64>> {
        let raw = self.required(section, key)?;
        let parts: Vec<String> = raw.split(',').map(|s| s.trim().to_string()).collect();
        let mut out = Vec::with_capacity(parts.len());
        for part in parts {
            let z = self.parse(section, key, &part, "a complex number `a+bi`", |s| {
                parse_complex(s).filter(|z| z.re.is_finite() && z.im.is_finite())
            })?;
            out.push(z);
        }
        Some(out)
    }

    fn real_list(&mut self, section: &str, key: &str) -> Option<Vec<f64>> {
        let raw = self.required(section, key)?;
        let mut out = Vec::new();
        for part in raw.split(',') {
            out.push(self.parse(section, key, part, "a real number", |s| {
                s.parse::<f64>().ok().filter(|v| v.is_finite())
            })?);
        }
        Some(out)
    }
}

fn is_real(zs: &[C64]) -> bool {
    zs.iter().all(|z| z.im == 0.0)
}

/// Parses and validates a scenario.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigErrors> {
    let mut diags = Vec::new();
    let sections = lex(text, &mut diags);
    if !sections.contains_key("system") {
        diags.insert(
            0,
            Diagnostic {
                line: None,
                message: "missing section: system".into(),
            },
        );
        return Err(ConfigErrors(diags));
    }
    for required in ["flow", "grid"] {
        if !sections.contains_key(required) {
            diags.push(Diagnostic {
                line: None,
                message: format!("missing section: {required}"),
            });
        }
    }

    let mut rd = Reader {
        sections: &sections,
        diags: &mut diags,
    };
    let n = rd.count("system", "n");
    let order = if sections.contains_key("flow") {
        rd.count("flow", "order")
    } else {
        None
    };

    for (name, section) in &sections {
        let allowed = allowed_keys(name, order.unwrap_or(0), n.unwrap_or(0));
        for (key, entry) in &section.entries {
            if !allowed.contains(key) {
                let hint = suggestion(key, allowed.clone());
                rd.error(
                    Some(entry.line),
                    format!("unknown key `{key}` in [{name}]{hint}"),
                );
            }
        }
    }

    let j = rd.complex_list("system", "j");
    if let (Some(n), Some(j)) = (n, &j) {
        if n < 2 {
            let line = rd.line("system", "n");
            rd.error(
                line,
                format!("n = {n}: the system needs at least two components"),
            );
        } else if j.len() != n {
            let line = rd.line("system", "j");
            rd.error(line, format!("j has {} entries but n = {n}", j.len()));
        } else if let Err(e) = DiagonalGenerator::new(j.clone()) {
            let line = rd.line("system", "j");
            let message = match e {
                nisakns_core::Error::SingularGenerator(..) => {
                    format!("J must have pairwise distinct diagonal entries ({e})")
                }
                e => format!("invalid J: {e}"),
            };
            rd.error(line, message);
        }
    }

    let f = if sections.contains_key("flow") {
        rd.complex_list("flow", "f")
    } else {
        None
    };
    if let (Some(order), Some(f)) = (order, &f) {
        if let Some(deg) = SpectralPolynomial::new(f.clone()).degree() {
            if deg > order {
                let line = rd.line("flow", "f");
                rd.error(
                    line,
                    format!("deg f = {deg} exceeds the hierarchy order {order}"),
                );
            }
        }
    }

    let mut alphas = Vec::new();
    if let (Some(order), Some(n)) = (order, n) {
        for i in 0..=order {
            let key = format!("alpha_{i}");
            if rd.entry("constants", &key).is_none() {
                alphas.push(vec![C64::new(0.0, 0.0); n]);
                continue;
            }
            let Some(diag) = rd.complex_list("constants", &key) else {
                continue;
            };
            let line = rd.line("constants", &key);
            if diag.len() != n {
                rd.error(
                    line,
                    format!("{key} has {} entries but n = {n}", diag.len()),
                );
                continue;
            }
            let trace: C64 = diag.iter().sum();
            if trace.norm() > 1e-12 {
                rd.error(
                    line,
                    format!(
                        "{key} must be trace-free, its entries sum to {}",
                        format_complex(trace)
                    ),
                );
            }
            alphas.push(diag);
        }
    }

    let (mut x_min, mut x_max, mut nx, mut t) = (None, None, None, None);
    if sections.contains_key("grid") {
        x_min = rd.real("grid", "x_min");
        x_max = rd.real("grid", "x_max");
        nx = rd.count("grid", "nx");
        t = rd.real_list("grid", "t");
        if let (Some(a), Some(b), Some(m), Some(ts)) = (x_min, x_max, nx, &t) {
            if let Err(e) = Grid::new(a, b, m, ts.clone()) {
                let line = sections.get("grid").map(|s| s.line);
                rd.error(line, e.to_string());
            } else if ts.windows(2).any(|w| !(w[0] < w[1])) {
                let line = rd.line("grid", "t");
                rd.error(line, "t samples must be strictly increasing".into());
            }
        }
    }

    let potential = match rd.entry("potential", "kind").map(|e| e.value.clone()) {
        None => PotentialKind::Zero,
        Some(kind) if kind == "zero" => PotentialKind::Zero,
        Some(kind) if kind == "gaussian" => {
            let amplitude = rd.complex_list("potential", "amplitude");
            let centre = rd.real("potential", "centre");
            let width = rd.real("potential", "width");
            let mut out = PotentialKind::Zero;
            if let (Some(amplitude), Some(centre), Some(width), Some(n)) =
                (amplitude, centre, width, n)
            {
                let line = rd.line("potential", "amplitude");
                if amplitude.len() != n * n {
                    rd.error(
                        line,
                        format!(
                            "amplitude needs n^2 = {} row-major entries, found {}",
                            n * n,
                            amplitude.len()
                        ),
                    );
                } else if (0..n).any(|i| amplitude[i * n + i] != C64::new(0.0, 0.0)) {
                    rd.error(
                        line,
                        "the potential must be off-diagonal: diagonal amplitudes must be 0".into(),
                    );
                } else if !(width > 0.0) {
                    let line = rd.line("potential", "width");
                    rd.error(line, format!("width must be positive, found {width}"));
                } else {
                    out = PotentialKind::Gaussian {
                        amplitude,
                        centre,
                        width,
                    };
                }
            }
            out
        }
        Some(kind) => {
            let line = rd.line("potential", "kind");
            let hint = suggestion(&kind, vec!["zero".into(), "gaussian".into()]);
            rd.error(line, format!("unknown potential kind `{kind}`{hint}"));
            PotentialKind::Zero
        }
    };

    let mut seeding = None;
    if sections.contains_key("darboux") {
        let has_kappa = rd.entry("darboux", "kappa0").is_some();
        let has_lambda = rd.entry("darboux", "lambda").is_some();
        let line = sections.get("darboux").map(|s| s.line);
        if has_kappa && has_lambda {
            rd.error(line, "`kappa0` and `lambda` are mutually exclusive".into());
        } else if has_kappa {
            let kappa0 = rd.real("darboux", "kappa0");
            let c0 = rd.optional_real("darboux", "c0");
            let second = rd.optional_real("darboux", "second_lambda");
            let second_c = rd.optional_real("darboux", "second_c");
            let window = if rd.entry("darboux", "t_window").is_some() {
                rd.real_list("darboux", "t_window")
            } else {
                Some(vec![0.0, 0.25])
            };
            let mkdv = n == Some(2)
                && j.as_deref() == Some(mkdv_generator().entries())
                && order == Some(3)
                && f.as_ref().map(|f| SpectralPolynomial::new(f.clone())) == Some(mkdv_flow())
                && alphas.len() == 4
                && alphas[3] == [C64::new(-4.0, 0.0), C64::new(4.0, 0.0)]
                && alphas[..3]
                    .iter()
                    .flatten()
                    .all(|a| *a == C64::new(0.0, 0.0));
            if !mkdv {
                rd.error(
                    line,
                    "`kappa0` selects the MKdV seed, which needs n = 2, j = 1, -1, order = 3, f = 0, 0, 0, 1, alpha_3 = -4, 4 and the other constants zero".into(),
                );
            }
            if let Some(w) = &window {
                if w.len() != 2 {
                    let line = rd.line("darboux", "t_window");
                    rd.error(
                        line,
                        format!("t_window needs two values, found {}", w.len()),
                    );
                }
            }
            if let (Some(kappa0), Some(c0), Some(second), Some(second_c), Some(w), true) =
                (kappa0, c0, second, second_c, window, mkdv)
            {
                if w.len() == 2 {
                    let candidate = Seeding::Mkdv {
                        kappa0,
                        c0: c0.unwrap_or(-4.0),
                        t_window: (w[0], w[1]),
                        second_lambda: second,
                        second_c: second_c.unwrap_or(0.0),
                    };
                    if let (Some(a), Some(b), Some(m), Some(ts)) = (x_min, x_max, nx, &t) {
                        if let Ok(grid) = Grid::new(a, b, m, ts.clone()) {
                            if let Err(e) = soliton_spec_from(&candidate, grid)
                                .expect("mkdv seeding")
                                .validate()
                            {
                                rd.error(line, format!("invalid soliton parameters: {e}"));
                            }
                        }
                    }
                    seeding = Some(candidate);
                }
            }
        } else {
            for key in ["c0", "t_window", "second_lambda", "second_c"] {
                if rd.entry("darboux", key).is_some() {
                    let line = rd.line("darboux", key);
                    rd.error(
                        line,
                        format!("`{key}` only applies to the MKdV seed selected by `kappa0`"),
                    );
                }
            }
            let lambda = rd.complex_list("darboux", "lambda");
            if let (Some(lambda), Some(n), Some(j)) = (lambda, n, &j) {
                let lline = rd.line("darboux", "lambda");
                if lambda.len() != n {
                    rd.error(
                        lline,
                        format!("lambda has {} entries but n = {n}", lambda.len()),
                    );
                }
                if let Ok(generator) = DiagonalGenerator::new(j.clone()) {
                    for (k, &l) in lambda.iter().enumerate() {
                        if nisakns_core::darboux::gamma_distance(l, &generator) <= 1e-12 {
                            rd.error(
                                lline,
                                format!("lambda_{} = {} lies on Gamma_J", k + 1, format_complex(l)),
                            );
                        }
                    }
                }
                let mut mixing = Vec::new();
                for k in 1..=n {
                    if let Some(m) = rd.complex_list("darboux", &format!("mixing_{k}")) {
                        if m.len() != n {
                            let ml = rd.line("darboux", &format!("mixing_{k}"));
                            rd.error(
                                ml,
                                format!("mixing_{k} has {} entries but n = {n}", m.len()),
                            );
                        }
                        mixing.push(m);
                    }
                }
                seeding = Some(Seeding::Generic { lambda, mixing });
            }
        }
    }

    let mut tolerances = CheckTolerances::default();
    for key in TOLERANCE_KEYS {
        if rd.entry("tolerances", key).is_some() {
            if let Some(v) = rd.real("tolerances", key) {
                if v < 0.0 {
                    let line = rd.line("tolerances", key);
                    rd.error(line, format!("tolerance `{key}` must be non-negative"));
                }
                *tolerances.slot(key).expect("tolerance key") = v;
            }
        }
    }
    if tolerances.order_min > tolerances.order_max {
        let line = rd.line("tolerances", "order_min");
        rd.error(line, "order_min exceeds order_max".into());
    }

    let directory = rd
        .entry("output", "directory")
        .map(|e| e.value.clone())
        .unwrap_or_else(|| "out".into());
    let mut formats = vec![Format::Csv, Format::Json];
    if let Some(raw) = rd.entry("output", "formats").map(|e| e.value.clone()) {
        formats.clear();
        for part in raw.split(',').map(str::trim) {
            match part {
                "csv" => formats.push(Format::Csv),
                "json" => formats.push(Format::Json),
                other => {
                    let line = rd.line("output", "formats");
                    rd.error(
                        line,
                        format!("unknown format `{other}`; expected csv or json"),
                    );
                }
            }
        }
        formats.sort();
        formats.dedup();
    }

    if !diags.is_empty() {
        diags.sort_by_key(|d| d.line);
        return Err(ConfigErrors(diags));
    }
    Ok(ScenarioConfig {
        j: j.expect("validated"),
        order: order.expect("validated"),
        f: f.expect("validated"),
        alphas,
        x_min: x_min.expect("validated"),
        x_max: x_max.expect("validated"),
        nx: nx.expect("validated"),
        t: t.expect("validated"),
        potential,
        seeding,
        tolerances,
        directory,
        formats,
    })
}

fn soliton_spec_from(seeding: &Seeding, grid: Grid) -> Option<SolitonSpec> {
    match seeding {
        Seeding::Mkdv {
            kappa0,
            c0,
            t_window,
            second_lambda,
            second_c,
        } => Some(SolitonSpec {
            kappa0: *kappa0,
            c0: *c0,
            t_window: *t_window,
            grid,
            second_lambda: second_lambda.map(|m| C64::new(m, 0.0)),
            second_c: *second_c,
        }),
        Seeding::Generic { .. } => None,
    }
}

/// Canonical text of a scenario: fixed section and key order, every
/// optional value written out.
pub fn emit(cfg: &ScenarioConfig) -> String {
    let mut out = String::new();
    let n = cfg.j.len();
    out += &format!(
        "[system]\nn = {n}\nj = {}\n",
        join(&cfg.j, |z| format_complex(*z))
    );
    out += &format!(
        "\n[flow]\norder = {}\nf = {}\n",
        cfg.order,
        join(&cfg.f, |z| format_complex(*z))
    );
    out += "\n[constants]\n";
    for (i, a) in cfg.alphas.iter().enumerate() {
        out += &format!("alpha_{i} = {}\n", join(a, |z| format_complex(*z)));
    }
    out += &format!(
        "\n[grid]\nx_min = {}\nx_max = {}\nnx = {}\nt = {}\n",
        format_real(cfg.x_min),
        format_real(cfg.x_max),
        cfg.nx,
        join(&cfg.t, |v| format_real(*v))
    );
    match &cfg.potential {
        PotentialKind::Zero => out += "\n[potential]\nkind = zero\n",
        PotentialKind::Gaussian {
            amplitude,
            centre,
            width,
        } => {
            out += &format!(
                "\n[potential]\nkind = gaussian\namplitude = {}\ncentre = {}\nwidth = {}\n",
                join(amplitude, |z| format_complex(*z)),
                format_real(*centre),
                format_real(*width)
            );
        }
    }
    match &cfg.seeding {
        None => {}
        Some(Seeding::Mkdv {
            kappa0,
            c0,
            t_window,
            second_lambda,
            second_c,
        }) => {
            out += &format!(
                "\n[darboux]\nkappa0 = {}\nc0 = {}\nt_window = {}, {}\n",
                format_real(*kappa0),
                format_real(*c0),
                format_real(t_window.0),
                format_real(t_window.1)
            );
            if let Some(mu) = second_lambda {
                out += &format!("second_lambda = {}\n", format_real(*mu));
            }
            out += &format!("second_c = {}\n", format_real(*second_c));
        }
        Some(Seeding::Generic { lambda, mixing }) => {
            out += &format!(
                "\n[darboux]\nlambda = {}\n",
                join(lambda, |z| format_complex(*z))
            );
            for (k, m) in mixing.iter().enumerate() {
                out += &format!("mixing_{} = {}\n", k + 1, join(m, |z| format_complex(*z)));
            }
        }
    }
    out += "\n[tolerances]\n";
    for key in TOLERANCE_KEYS {
        out += &format!("{key} = {}\n", format_real(cfg.tolerances.get(key)));
    }
    out += &format!(
        "\n[output]\ndirectory = {}\nformats = {}\n",
        cfg.directory,
        join(&cfg.formats, |f| f.name().to_string())
    );
    out
}

impl ScenarioConfig {
    pub fn generator(&self) -> DiagonalGenerator {
        DiagonalGenerator::new(self.j.clone()).expect("validated generator")
    }

    pub fn flow(&self) -> SpectralPolynomial {
        SpectralPolynomial::new(self.f.clone())
    }

    pub fn constants(&self) -> IntegralConstants {
        IntegralConstants::from_diagonals(&self.alphas).expect("validated constants")
    }

    pub fn dim(&self) -> usize {
        self.j.len()
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.x_min, self.x_max, self.nx, self.t.clone()).expect("validated grid")
    }

    /// The MKdV soliton parameters on `grid`, when the MKdV seed is selected.
    pub fn soliton_spec(&self, grid: Grid) -> Option<SolitonSpec> {
        self.seeding
            .as_ref()
            .and_then(|s| soliton_spec_from(s, grid))
    }

    pub fn writes(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }

    /// Real `J` and spectral values, where the edge-rate predictions apply.
    pub fn is_real(&self) -> bool {
        is_real(&self.j)
            && match &self.seeding {
                Some(Seeding::Generic { lambda, .. }) => is_real(lambda),
                _ => true,
            }
    }

    pub fn potential_field(&self, grid: &Grid) -> FieldGrid {
        let n = self.dim();
        match &self.potential {
            PotentialKind::Zero => FieldGrid::zeros(grid.clone(), n),
            PotentialKind::Gaussian {
                amplitude,
                centre,
                width,
            } => FieldGrid::try_from_fn(grid.clone(), n, |x, _| {
                let g = (-((x - centre) / width).powi(2)).exp();
                let rows: Vec<Vec<C64>> = (0..n)
                    .map(|i| (0..n).map(|k| amplitude[i * n + k] * g).collect())
                    .collect();
                SquareMatrix::from_rows(&rows)
            })
            .expect("validated amplitude shape"),
        }
    }
}
