//! Scenario and experiment files.
//!
//! The grammar is line oriented:
//!
//! ```text
//! # comment
//! kind = transponder          # or airborne
//! rho = 0.5
//! lambda_su = 20
//!
//! [acr_mask]
//! offsets_mhz = [0, 1, 2]
//! acr_db = [0, 60, 60]
//!
//! [mc]
//! trials = 100000
//! seed = 42
//! budget = exact              # or an expected point count
//!
//! [sweep]
//! axis = lambda_su
//! values = [10, 100, 1000]
//!
//! [experiment]
//! kind = fig4-ithr
//!
//! [output]
//! path = "ithr.csv"
//! format = csv
//! ```
//!
//! Top-level keys are the numeric scenario fields, whose names carry their
//! unit, plus `kind` and `channel_offset_mhz`. Values are numbers, bare
//! words, double-quoted strings or single-line lists. Omitted fields take
//! the defaults of [`TransponderScenario`] and [`AirborneScenario`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use dmeshare::montecarlo::{McOptions, PointBudget};
use dmeshare::propagation::AcrMask;
use dmeshare::scenario::{MARGIN_ADJACENT_DB, MARGIN_CO_CHANNEL_DB};
use dmeshare::{
    AirborneScenario, Scenario, ScenarioKind, TransponderScenario, ValidationError, Violation,
};
use serde::Serialize;

/// Probability levels of the CDF experiment when none are given.
pub const DEFAULT_LEVELS: [f64; 11] = [
    0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99, 0.999, 0.9999,
];
pub const DEFAULT_I_THR_DBM: f64 = -150.0;
pub const DEFAULT_PROB_FLOOR: f64 = 0.9;
pub const DEFAULT_R_REF_KM: f64 = 5.0;
pub const DEFAULT_DELAYS_S: [f64; 3] = [0.0, 60.0, 300.0];
pub const DEFAULT_MC_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Fig3Cdf,
    Fig4Ithr,
    Fig5Frontier,
    Fig6Exclusion,
    Fig7Power,
    Custom,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Fig3Cdf,
        ExperimentKind::Fig4Ithr,
        ExperimentKind::Fig5Frontier,
        ExperimentKind::Fig6Exclusion,
        ExperimentKind::Fig7Power,
        ExperimentKind::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Fig3Cdf => "fig3-cdf",
            ExperimentKind::Fig4Ithr => "fig4-ithr",
            ExperimentKind::Fig5Frontier => "fig5-frontier",
            ExperimentKind::Fig6Exclusion => "fig6-exclusion",
            ExperimentKind::Fig7Power => "fig7-power",
            ExperimentKind::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Victim the experiment is defined for; `None` accepts either.
    pub fn scenario_kind(self) -> Option<ScenarioKind> {
        match self {
            ExperimentKind::Fig3Cdf | ExperimentKind::Fig4Ithr | ExperimentKind::Fig5Frontier => {
                Some(ScenarioKind::Transponder)
            }
            ExperimentKind::Fig6Exclusion | ExperimentKind::Fig7Power => {
                Some(ScenarioKind::Airborne)
            }
            ExperimentKind::Custom => None,
        }
    }

    /// Axis used when the file has no `[sweep]` section.
    pub fn default_axis(self, scenario: ScenarioKind) -> &'static str {
        match self {
            ExperimentKind::Fig3Cdf => "rho",
            ExperimentKind::Fig4Ithr | ExperimentKind::Fig7Power => "lambda_su",
            ExperimentKind::Fig5Frontier => "p_su_dbm",
            ExperimentKind::Fig6Exclusion => "acr_db",
            ExperimentKind::Custom => match scenario {
                ScenarioKind::Transponder => "rho",
                ScenarioKind::Airborne => "lambda_su",
            },
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(OutputFormat::Csv),
            "json" => Some(OutputFormat::Json),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub axis: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McBlock {
    pub trials: usize,
    pub seed: u64,
    pub budget: PointBudget,
}

impl McBlock {
    pub fn options(&self) -> McOptions {
        McOptions::new(self.trials, self.seed).with_budget(self.budget)
    }
}

/// Per-experiment constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentParams {
    /// Censoring level for the CDF and custom transponder runs.
    pub i_thr_dbm: f64,
    /// Transmission-probability floor of the density frontier.
    pub prob_floor: f64,
    pub r_ref_km: f64,
    pub delays_s: Vec<f64>,
    /// Exclusion radius of custom airborne runs.
    pub r_o_km: f64,
    pub levels: Vec<f64>,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            i_thr_dbm: DEFAULT_I_THR_DBM,
            prob_floor: DEFAULT_PROB_FLOOR,
            r_ref_km: DEFAULT_R_REF_KM,
            delays_s: DEFAULT_DELAYS_S.to_vec(),
            r_o_km: 0.0,
            levels: DEFAULT_LEVELS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: OutputFormat,
}

/// A validated experiment file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub scenario: Scenario,
    /// `None` when the margin follows the channel: 3 dB co-channel, 10 dB
    /// adjacent.
    pub margin_db: Option<f64>,
    pub sweep: Option<Sweep>,
    pub mc: Option<McBlock>,
    pub params: ExperimentParams,
    pub output: OutputSpec,
}

impl ExperimentSpec {
    /// Margin implied by the rejection when the file leaves it unset.
    pub fn margin_for(acr_db: f64) -> f64 {
        if acr_db > 0.0 {
            MARGIN_ADJACENT_DB
        } else {
            MARGIN_CO_CHANNEL_DB
        }
    }

    pub fn axis(&self) -> &str {
        match &self.sweep {
            Some(s) => &s.axis,
            None => self.kind.default_axis(self.scenario.kind()),
        }
    }

    /// Sweep values, or the scenario's own value of the default axis.
    pub fn axis_values(&self) -> Vec<f64> {
        match &self.sweep {
            Some(s) => s.values.clone(),
            None => vec![field_value(&self.scenario, self.axis()).unwrap_or(f64::NAN)],
        }
    }

    /// Scenario with the axis set to `value`, re-deriving the margin when
    /// it follows the channel.
    pub fn scenario_at(&self, value: f64) -> Scenario {
        let mut s = self.scenario.clone();
        s.set_field(self.axis(), value);
        if self.margin_db.is_none() {
            let acr = field_value(&s, "acr_db").unwrap_or(0.0);
            s.set_field("margin_db", Self::margin_for(acr));
        }
        s
    }
}

/// Reads a numeric field by name.
pub fn field_value(s: &Scenario, name: &str) -> Option<f64> {
    let v = serde_json::to_value(s).ok()?;
    v.get(name)?.as_f64()
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Number { value: f64, raw: String },
    Word(String),
    List(Vec<Value>),
}

impl Value {
    fn describe(&self) -> &'static str {
        match self {
            Value::Number { .. } => "a number",
            Value::Word(_) => "a word",
            Value::List(_) => "a list",
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: Value,
    line: usize,
}

const SECTIONS: [&str; 5] = ["acr_mask", "mc", "sweep", "experiment", "output"];

/// Parsed file: section name ("" for the top level) to key to entry.
type Document = BTreeMap<String, BTreeMap<String, Entry>>;

fn parse_scalar(text: &str) -> Result<Value, String> {
    let t = text.trim();
    if t.is_empty() {
        return Err("missing value".into());
    }
    if let Some(rest) = t.strip_prefix('"') {
        return match rest.strip_suffix('"') {
            Some(inner) if !inner.contains('"') => Ok(Value::Word(inner.to_string())),
            _ => Err(format!("unterminated string `{t}`")),
        };
    }
    let numeric = t.replace('_', "");
    if let Ok(value) = numeric.parse::<f64>() {
        if t.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+' || c == '.') {
            return Ok(Value::Number { value, raw: numeric });
        }
    }
    if t.chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | '/'))
    {
        return Ok(Value::Word(t.to_string()));
    }
    Err(format!("cannot read value `{t}`"))
}

fn parse_value(text: &str) -> Result<Value, String> {
    let t = text.trim();
    if let Some(rest) = t.strip_prefix('[') {
        let inner = rest
            .strip_suffix(']')
            .ok_or_else(|| format!("unterminated list `{t}`"))?;
        if inner.trim().is_empty() {
            return Ok(Value::List(Vec::new()));
        }
        let items = inner.trim().trim_end_matches(',');
        return items
            .split(',')
            .map(parse_scalar)
            .collect::<Result<Vec<_>, _>>()
            .map(Value::List);
    }
    parse_scalar(t)
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

fn parse_document(text: &str, out: &mut Vec<Violation>) -> Document {
    let mut doc = Document::new();
    doc.insert(String::new(), BTreeMap::new());
    let mut section = String::new();
    let mut skip = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = strip_comment(raw).trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                out.push(Violation::new(format!("[{name}]"), "unknown section").at_line(line));
                skip = true;
            } else if doc.contains_key(name) {
                out.push(Violation::new(format!("[{name}]"), "section repeated").at_line(line));
                skip = true;
            } else {
                doc.insert(name.to_string(), BTreeMap::new());
                section = name.to_string();
                skip = false;
            }
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            out.push(Violation::new(body, "expected `key = value`").at_line(line));
            continue;
        };
        let key = key.trim();
        let field = qualified(&section, key);
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            out.push(Violation::new(field, "invalid key").at_line(line));
            continue;
        }
        let value = match parse_value(value) {
            Ok(v) => v,
            Err(e) => {
                out.push(Violation::new(field, e).at_line(line));
                continue;
            }
        };
        if skip {
            continue;
        }
        let table = doc.get_mut(&section).expect("section registered");
        if table.contains_key(key) {
            out.push(Violation::new(field, "key repeated").at_line(line));
            continue;
        }
        table.insert(key.to_string(), Entry { value, line });
    }
    doc
}

fn qualified(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

/// Typed access to one section, recording every problem it meets.
struct Reader<'a> {
    section: &'a str,
    table: BTreeMap<String, Entry>,
    out: &'a mut Vec<Violation>,
}

impl<'a> Reader<'a> {
    fn new(doc: &mut Document, section: &'a str, out: &'a mut Vec<Violation>) -> Self {
        Self {
            section,
            table: doc.remove(section).unwrap_or_default(),
            out,
        }
    }

    fn fail(&mut self, key: &str, line: usize, message: impl Into<String>) {
        self.out
            .push(Violation::new(qualified(self.section, key), message).at_line(line));
    }

    fn take(&mut self, key: &str) -> Option<Entry> {
        self.table.remove(key)
    }

    fn number(&mut self, key: &str) -> Option<(f64, usize)> {
        let e = self.take(key)?;
        match e.value {
            Value::Number { value, .. } => Some((value, e.line)),
            other => {
                let d = other.describe();
                self.fail(key, e.line, format!("expected a number, found {d}"));
                None
            }
        }
    }

    fn word(&mut self, key: &str) -> Option<(String, usize)> {
        let e = self.take(key)?;
        match e.value {
            Value::Word(w) => Some((w, e.line)),
            other => {
                let d = other.describe();
                self.fail(key, e.line, format!("expected a word, found {d}"));
                None
            }
        }
    }

    fn numbers(&mut self, key: &str) -> Option<(Vec<f64>, usize)> {
        let e = self.take(key)?;
        let Value::List(items) = e.value else {
            let d = e.value.describe();
            self.fail(key, e.line, format!("expected a list of numbers, found {d}"));
            return None;
        };
        let mut values = Vec::with_capacity(items.len());
        for item in items {
            match item {
                Value::Number { value, .. } => values.push(value),
                other => {
                    let d = other.describe();
                    self.fail(key, e.line, format!("list entries must be numbers, found {d}"));
                    return None;
                }
            }
        }
        Some((values, e.line))
    }

    fn integer(&mut self, key: &str) -> Option<(u64, usize)> {
        let e = self.take(key)?;
        if let Value::Number { value, raw } = &e.value {
            if let Ok(n) = raw.parse::<u64>() {
                return Some((n, e.line));
            }
            if value.fract() == 0.0 && *value >= 0.0 && *value < 2f64.powi(53) {
                return Some((*value as u64, e.line));
            }
        }
        self.fail(key, e.line, "expected a non-negative integer");
        None
    }

    /// Reports whatever keys were not consumed.
    fn finish(self) {
        for (key, e) in self.table {
            self.out.push(
                Violation::new(qualified(self.section, &key), "unknown key").at_line(e.line),
            );
        }
    }
}

fn default_scenario(kind: ScenarioKind) -> Scenario {
    match kind {
        ScenarioKind::Transponder => Scenario::Transponder(TransponderScenario::default()),
        ScenarioKind::Airborne => Scenario::Airborne(AirborneScenario::default()),
    }
}

fn victim(kind: ScenarioKind) -> &'static str {
    match kind {
        ScenarioKind::Transponder => "transponder",
        ScenarioKind::Airborne => "airborne",
    }
}

fn parse_scenario_kind(s: &str) -> Option<ScenarioKind> {
    match s {
        "transponder" => Some(ScenarioKind::Transponder),
        "airborne" => Some(ScenarioKind::Airborne),
        _ => None,
    }
}

/// Parses and validates an experiment file, reporting every problem.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec, ValidationError> {
    let mut out = Vec::new();
    let mut doc = parse_document(text, &mut out);

    // Scenario kind first: it decides which fields exist.
    let mut top = Reader::new(&mut doc, "", &mut out);
    let kind = match top.word("kind") {
        Some((w, line)) => match parse_scenario_kind(&w) {
            Some(k) => Some(k),
            None => {
                top.fail("kind", line, format!("must be `transponder` or `airborne`, got `{w}`"));
                None
            }
        },
        None => {
            out_missing(&mut top, "kind", "required: `transponder` or `airborne`");
            None
        }
    };
    let mut scenario = default_scenario(kind.unwrap_or(ScenarioKind::Transponder));
    let mut lines: BTreeMap<String, usize> = BTreeMap::new();
    let mut margin_db = None;
    let mut acr_set = false;
    if let Some(kind) = kind {
        for &name in Scenario::numeric_fields(kind) {
            if let Some((v, line)) = top.number(name) {
                scenario.set_field(name, v);
                lines.insert(name.to_string(), line);
                match name {
                    "margin_db" => margin_db = Some(v),
                    "acr_db" => acr_set = true,
                    _ => {}
                }
            }
        }
    }
    let offset = top.number("channel_offset_mhz");
    if kind.is_some() {
        top.finish();
    } else {
        // Without a kind, only flag keys that neither victim knows.
        let known: Vec<&str> = Scenario::numeric_fields(ScenarioKind::Transponder)
            .iter()
            .chain(Scenario::numeric_fields(ScenarioKind::Airborne))
            .copied()
            .collect();
        top.table.retain(|k, _| !known.contains(&k.as_str()));
        top.finish();
    }

    let mask = read_mask(&mut doc, &mut out);
    if let Some((offset, line)) = offset {
        if acr_set {
            out.push(
                Violation::new("channel_offset_mhz", "conflicts with an explicit acr_db")
                    .at_line(line),
            );
        } else {
            match mask.lookup(offset) {
                Ok(acr) => {
                    scenario.set_field("acr_db", acr);
                }
                Err(e) => out.push(Violation::new("channel_offset_mhz", e.to_string()).at_line(line)),
            }
        }
    }
    if margin_db.is_none() {
        let acr = field_value(&scenario, "acr_db").unwrap_or(0.0);
        scenario.set_field("margin_db", ExperimentSpec::margin_for(acr));
    }
    for v in scenario.violations() {
        let line = lines.get(&v.field).copied();
        out.push(match line {
            Some(l) => v.at_line(l),
            None => v,
        });
    }

    let mc = read_mc(&mut doc, &mut out);
    let (exp_kind, params) = read_experiment(&mut doc, &mut out, kind);
    let sweep = read_sweep(&mut doc, &mut out, kind);
    let output = read_output(&mut doc, &mut out);

    if exp_kind == ExperimentKind::Fig3Cdf && mc.is_none() {
        out.push(Violation::new("[mc]", "fig3-cdf needs a Monte Carlo block"));
    }
    let spec = ExperimentSpec {
        kind: exp_kind,
        scenario,
        margin_db,
        sweep,
        mc,
        params,
        output,
    };
    if kind.is_some() {
        check_sweep_rows(&spec, &mut out);
    }
    if out.is_empty() {
        Ok(spec)
    } else {
        Err(ValidationError(out))
    }
}

fn out_missing(r: &mut Reader<'_>, key: &str, message: &str) {
    r.out.push(Violation::new(qualified(r.section, key), message));
}

fn read_mask(doc: &mut Document, out: &mut Vec<Violation>) -> AcrMask {
    if !doc.contains_key("acr_mask") {
        return AcrMask::default();
    }
    let mut r = Reader::new(doc, "acr_mask", out);
    let offsets = r.numbers("offsets_mhz");
    let acrs = r.numbers("acr_db");
    let mask = match (offsets, acrs) {
        (Some((o, line)), Some((a, _))) => {
            if o.len() != a.len() {
                r.fail("acr_db", line, format!("has {} entries for {} offsets", a.len(), o.len()));
                None
            } else {
                match AcrMask::new(o.into_iter().zip(a).collect()) {
                    Ok(m) => Some(m),
                    Err(e) => {
                        r.fail("offsets_mhz", line, e.to_string());
                        None
                    }
                }
            }
        }
        (None, None) => {
            out_missing(&mut r, "offsets_mhz", "required in [acr_mask]");
            None
        }
        (Some((_, line)), None) | (None, Some((_, line))) => {
            r.fail("offsets_mhz", line, "offsets_mhz and acr_db must be given together");
            None
        }
    };
    r.finish();
    mask.unwrap_or_default()
}

fn read_mc(doc: &mut Document, out: &mut Vec<Violation>) -> Option<McBlock> {
    if !doc.contains_key("mc") {
        return None;
    }
    let mut r = Reader::new(doc, "mc", out);
    let trials = match r.integer("trials") {
        Some((0, line)) => {
            r.fail("trials", line, "must be at least 1");
            1
        }
        Some((n, _)) => n as usize,
        None => {
            out_missing(&mut r, "trials", "required in [mc]");
            1
        }
    };
    let seed = r.integer("seed").map_or(DEFAULT_MC_SEED, |(s, _)| s);
    let budget = match r.take("budget") {
        None => PointBudget::default(),
        Some(Entry { value: Value::Word(w), .. }) if w == "exact" => PointBudget::Exact,
        Some(Entry { value: Value::Number { value, .. }, .. }) if value >= 1.0 && value.is_finite() => {
            PointBudget::Points(value)
        }
        Some(e) => {
            r.fail("budget", e.line, "must be `exact` or a point count of at least 1");
            PointBudget::default()
        }
    };
    r.finish();
    Some(McBlock { trials, seed, budget })
}

fn read_experiment(
    doc: &mut Document,
    out: &mut Vec<Violation>,
    scenario: Option<ScenarioKind>,
) -> (ExperimentKind, ExperimentParams) {
    let mut params = ExperimentParams::default();
    if !doc.contains_key("experiment") {
        return (ExperimentKind::Custom, params);
    }
    let mut r = Reader::new(doc, "experiment", out);
    let kind = match r.word("kind") {
        Some((w, line)) => match ExperimentKind::parse(&w) {
            Some(k) => {
                if let (Some(want), Some(have)) = (k.scenario_kind(), scenario) {
                    if want != have {
                        r.fail(
                            "kind",
                            line,
                            format!("{k} needs the {} victim, got {}", victim(want), victim(have)),
                        );
                    }
                }
                k
            }
            None => {
                let names: Vec<_> = ExperimentKind::ALL.iter().map(|k| k.as_str()).collect();
                r.fail("kind", line, format!("unknown experiment `{w}`; expected one of {}", names.join(", ")));
                ExperimentKind::Custom
            }
        },
        None => ExperimentKind::Custom,
    };
    if let Some((v, line)) = r.number("i_thr_dbm") {
        if !v.is_finite() {
            r.fail("i_thr_dbm", line, "must be finite");
        }
        params.i_thr_dbm = v;
    }
    if let Some((v, line)) = r.number("prob_floor") {
        if !(0.0..1.0).contains(&v) {
            r.fail("prob_floor", line, format!("must lie in [0, 1), got {v}"));
        }
        params.prob_floor = v;
    }
    if let Some((v, line)) = r.number("r_ref_km") {
        if !(v > 0.0 && v.is_finite()) {
            r.fail("r_ref_km", line, format!("must be positive, got {v}"));
        }
        params.r_ref_km = v;
    }
    if let Some((v, line)) = r.numbers("delays_s") {
        if v.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            r.fail("delays_s", line, "delays must be finite and non-negative");
        }
        params.delays_s = v;
    }
    if let Some((v, line)) = r.number("r_o_km") {
        if !(v >= 0.0 && v.is_finite()) {
            r.fail("r_o_km", line, format!("must be non-negative, got {v}"));
        }
        params.r_o_km = v;
    }
    if let Some((v, line)) = r.numbers("levels") {
        if v.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            r.fail("levels", line, "levels must lie strictly between 0 and 1");
        }
        params.levels = v;
    }
    r.finish();
    (kind, params)
}

fn read_sweep(
    doc: &mut Document,
    out: &mut Vec<Violation>,
    scenario: Option<ScenarioKind>,
) -> Option<Sweep> {
    if !doc.contains_key("sweep") {
        return None;
    }
    let mut r = Reader::new(doc, "sweep", out);
    let axis = r.word("axis");
    let values = r.numbers("values");
    let sweep = match (axis, values) {
        (Some((axis, line)), Some((values, _))) => {
            match scenario {
                Some(k) if !Scenario::numeric_fields(k).contains(&axis.as_str()) => {
                    r.fail("axis", line, format!("`{axis}` is not a {} field", victim(k)));
                    None
                }
                _ => Some(Sweep { axis, values }),
            }
        }
        (None, _) => {
            out_missing(&mut r, "axis", "required in [sweep]");
            None
        }
        (_, None) => {
            out_missing(&mut r, "values", "required in [sweep]");
            None
        }
    };
    r.finish();
    sweep
}

fn read_output(doc: &mut Document, out: &mut Vec<Violation>) -> OutputSpec {
    let mut spec = OutputSpec {
        path: None,
        format: OutputFormat::Csv,
    };
    if !doc.contains_key("output") {
        return spec;
    }
    let mut r = Reader::new(doc, "output", out);
    if let Some((p, _)) = r.word("path") {
        spec.path = Some(PathBuf::from(p));
    }
    if let Some((f, line)) = r.word("format") {
        match OutputFormat::parse(&f) {
            Some(fmt) => spec.format = fmt,
            None => r.fail("format", line, format!("must be `csv` or `json`, got `{f}`")),
        }
    }
    r.finish();
    spec
}

/// Every swept scenario must itself be valid.
fn check_sweep_rows(spec: &ExperimentSpec, out: &mut Vec<Violation>) {
    let Some(sweep) = &spec.sweep else { return };
    for &v in &sweep.values {
        for bad in spec.scenario_at(v).violations() {
            out.push(Violation::new(
                "sweep.values".to_string(),
                format!("at {} = {v}: `{}` {}", sweep.axis, bad.field, bad.message),
            ));
        }
    }
}
