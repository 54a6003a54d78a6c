//! Scenario documents: TOML text checked against the grammar in
//! `scenarios/GRAMMAR.md`, with every problem collected as a [`Diagnostic`].

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path as FsPath;

use nalgebra::Vector3;
use serde::Serialize;
use toml::{Table, Value};
use topophase::dynamics::InterferometerSetup;
use topophase::fields::{Axis, Envelope, ExpressionField, FieldConfig};
use topophase::gauge::{RegionShape, SampleRegion};
use topophase::phase::{Path, SpacetimePath, Timing};
use topophase::spinor::{FourVector, PolarizedParticle};

/// Largest interferometer grid edge.
pub const MAX_GRID: i64 = 2048;
/// Largest number of randomized identity trials.
pub const MAX_TRIALS: i64 = 1_000_000;
/// Largest number of precession steps.
pub const MAX_STEPS: i64 = 10_000_000;
/// Largest condition-lattice resolution per axis.
pub const MAX_RESOLUTION: i64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DiagnosticKind {
    SyntaxError,
    UnknownKey,
    MissingBlock,
    RangeViolation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    /// Dotted location in the document, e.g. `tasks[1].path`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {}", self.kind, self.path, self.message)
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    /// Free-form note from the `[units]` block. Computation is always in
    /// natural units.
    pub units: Option<String>,
    pub particle: PolarizedParticle,
    pub field: FieldConfig,
    pub paths: BTreeMap<String, SpacetimePath>,
    pub tasks: Vec<TaskSpec>,
}

#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub name: String,
    pub kind: TaskKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    Open,
    Ac,
    Sab,
    Flux,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DriverKind {
    PeshkinLipkin,
    Effective,
}

/// A precession driver fed by the scenario field along r(t) = start + v t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverSpec {
    pub kind: DriverKind,
    pub start: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Finite-difference step for the effective fields.
    pub derivative_step: f64,
}

#[derive(Debug, Clone)]
pub enum TaskKind {
    Phase { path: String, which: PhaseKind, tolerance: f64, velocity: Vector3<f64> },
    Conditions { region: SampleRegion, tolerance: f64, step: f64 },
    Evolve { setup: InterferometerSetup },
    Precession { driver: DriverSpec, t0: f64, t1: f64, steps: usize, initial: Vector3<f64>, stride: usize },
    Autocorrelation { driver: DriverSpec, t_i: f64, t_f: f64, state: Vector3<f64> },
    IdentityChecks { trials: usize, event: FourVector },
}

impl TaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::Phase { .. } => "phase",
            TaskKind::Conditions { .. } => "conditions",
            TaskKind::Evolve { .. } => "evolve",
            TaskKind::Precession { .. } => "precession",
            TaskKind::Autocorrelation { .. } => "autocorrelation",
            TaskKind::IdentityChecks { .. } => "identity_checks",
        }
    }
}

struct Diags(RefCell<Vec<Diagnostic>>);

impl Diags {
    fn push(&self, kind: DiagnosticKind, path: impl Into<String>, message: impl Into<String>) {
        self.0.borrow_mut().push(Diagnostic { kind, path: path.into(), message: message.into() });
    }
}

/// One TOML table being read; remembers which keys were consumed so the
/// rest can be reported as unknown.
struct Block<'a> {
    table: &'a Table,
    path: String,
    used: RefCell<BTreeSet<&'a str>>,
    diags: &'a Diags,
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "a string",
        Value::Integer(_) => "an integer",
        Value::Float(_) => "a float",
        Value::Boolean(_) => "a boolean",
        Value::Datetime(_) => "a datetime",
        Value::Array(_) => "an array",
        Value::Table(_) => "a table",
    }
}

fn as_number(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

impl<'a> Block<'a> {
    fn new(table: &'a Table, path: impl Into<String>, diags: &'a Diags) -> Self {
        Self { table, path: path.into(), used: RefCell::new(BTreeSet::new()), diags }
    }

    fn at(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        let (k, v) = self.table.get_key_value(key)?;
        self.used.borrow_mut().insert(k.as_str());
        Some(v)
    }

    fn missing(&self, key: &str) {
        self.diags.push(DiagnosticKind::MissingBlock, self.at(key), "required but not given");
    }

    fn mistyped(&self, key: &str, expected: &str, found: &Value) {
        self.diags.push(
            DiagnosticKind::SyntaxError,
            self.at(key),
            format!("expected {expected}, found {}", type_name(found)),
        );
    }

    fn range(&self, key: &str, message: impl Into<String>) {
        self.diags.push(DiagnosticKind::RangeViolation, self.at(key), message);
    }

    fn number(&self, key: &str, default: Option<f64>) -> Option<f64> {
        match self.get(key) {
            None => {
                if default.is_none() {
                    self.missing(key);
                }
                default
            }
            Some(v) => match as_number(v) {
                Some(x) if x.is_finite() => Some(x),
                Some(_) => {
                    self.range(key, "must be finite");
                    None
                }
                None => {
                    self.mistyped(key, "a number", v);
                    None
                }
            },
        }
    }

    fn positive(&self, key: &str, default: Option<f64>) -> Option<f64> {
        let x = self.number(key, default)?;
        if x > 0.0 {
            Some(x)
        } else {
            self.range(key, format!("must be positive, got {x}"));
            None
        }
    }

    fn integer(&self, key: &str, default: Option<i64>, lo: i64, hi: i64) -> Option<i64> {
        let n = match self.get(key) {
            None => {
                if default.is_none() {
                    self.missing(key);
                }
                default?
            }
            Some(Value::Integer(n)) => *n,
            Some(v) => {
                self.mistyped(key, "an integer", v);
                return None;
            }
        };
        if (lo..=hi).contains(&n) {
            Some(n)
        } else {
            self.range(key, format!("must lie in [{lo}, {hi}], got {n}"));
            None
        }
    }

    fn string(&self, key: &str, default: Option<&str>) -> Option<String> {
        match self.get(key) {
            None => {
                if default.is_none() {
                    self.missing(key);
                }
                default.map(str::to_string)
            }
            Some(Value::String(s)) => Some(s.clone()),
            Some(v) => {
                self.mistyped(key, "a string", v);
                None
            }
        }
    }

    fn choice<T: Copy>(&self, key: &str, options: &[(&str, T)], default: Option<T>) -> Option<T> {
        let s = match self.get(key) {
            None => {
                if default.is_none() {
                    self.missing(key);
                }
                return default;
            }
            Some(Value::String(s)) => s,
            Some(v) => {
                self.mistyped(key, "a string", v);
                return None;
            }
        };
        let found = options.iter().find(|(name, _)| name == s).map(|(_, t)| *t);
        if found.is_none() {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            self.diags.push(
                DiagnosticKind::UnknownKey,
                self.at(key),
                format!("unknown value `{s}`, expected one of {}", names.join(", ")),
            );
        }
        found
    }

    fn numbers(&self, key: &str, v: &Value, len: Option<usize>) -> Option<Vec<f64>> {
        let Value::Array(items) = v else {
            self.mistyped(key, "an array of numbers", v);
            return None;
        };
        let out: Option<Vec<f64>> = items.iter().map(as_number).collect();
        let Some(out) = out else {
            self.mistyped(key, "an array of numbers", v);
            return None;
        };
        if out.iter().any(|x| !x.is_finite()) {
            self.range(key, "entries must be finite");
            return None;
        }
        if let Some(n) = len {
            if out.len() != n {
                self.range(key, format!("needs {n} entries, got {}", out.len()));
                return None;
            }
        }
        Some(out)
    }

    fn vec3(&self, key: &str, default: Option<Vector3<f64>>) -> Option<Vector3<f64>> {
        match self.get(key) {
            None => {
                if default.is_none() {
                    self.missing(key);
                }
                default
            }
            Some(v) => self.numbers(key, v, Some(3)).map(|x| Vector3::new(x[0], x[1], x[2])),
        }
    }

    fn direction(&self, key: &str, default: Option<Vector3<f64>>) -> Option<Vector3<f64>> {
        let v = self.vec3(key, default)?;
        if v.norm() > 0.0 {
            Some(v.normalize())
        } else {
            self.range(key, "direction must be nonzero");
            None
        }
    }

    fn vertices(&self, key: &str) -> Option<Vec<Vector3<f64>>> {
        let Some(v) = self.get(key) else {
            self.missing(key);
            return None;
        };
        let Value::Array(items) = v else {
            self.mistyped(key, "an array of [x, y, z] triples", v);
            return None;
        };
        items
            .iter()
            .enumerate()
            .map(|(i, item)| {
                self.numbers(&format!("{key}[{i}]"), item, Some(3)).map(|x| Vector3::new(x[0], x[1], x[2]))
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    }

    fn table(&self, key: &str, required: bool) -> Option<Block<'a>> {
        match self.get(key) {
            None => {
                if required {
                    self.missing(key);
                }
                None
            }
            Some(Value::Table(t)) => Some(Block::new(t, self.at(key), self.diags)),
            Some(v) => {
                self.mistyped(key, "a table", v);
                None
            }
        }
    }

    fn finish(&self) {
        let used = self.used.borrow();
        for key in self.table.keys() {
            if !used.contains(key.as_str()) {
                self.diags.push(DiagnosticKind::UnknownKey, self.at(key), "unknown key");
            }
        }
    }
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// Parses, cross-references and range-checks a scenario. `base` resolves
/// relative file references. Every diagnostic is collected; parsing never
/// stops at the first problem.
pub fn parse_scenario(src: &str, base: &FsPath) -> Result<Scenario, Vec<Diagnostic>> {
    let table: Table = match toml::from_str(src) {
        Ok(t) => t,
        Err(e) => {
            let location = e.span().map(|s| {
                let (l, c) = line_col(src, s.start);
                format!("line {l}, column {c}")
            });
            return Err(vec![Diagnostic {
                kind: DiagnosticKind::SyntaxError,
                path: location.unwrap_or_else(|| "document".into()),
                message: e.message().trim().to_string(),
            }]);
        }
    };
    let diags = Diags(RefCell::new(Vec::new()));
    let root = Block::new(&table, "", &diags);
    let name = root.string("name", Some("unnamed"));
    let description = root.string("description", Some(""));
    let units = root.table("units", false).map(|u| {
        let note = u.string("note", Some(""));
        u.finish();
        note.unwrap_or_default()
    });
    let particle = root.table("particle", true).and_then(|b| particle_block(&b));
    let field = root.table("field", true).and_then(|b| field_block(&b));
    let paths = paths_block(&root, base);
    let tasks = tasks_block(&root, particle.as_ref(), field.as_ref(), &paths);
    root.finish();

    let diags = diags.0.into_inner();
    if !diags.is_empty() {
        return Err(diags);
    }
    match (name, description, particle, field, tasks) {
        (Some(name), Some(description), Some(particle), Some(field), Some(tasks)) => Ok(Scenario {
            name,
            description,
            units,
            particle,
            field,
            paths: paths.into_iter().filter_map(|(k, v)| Some((k, v?))).collect(),
            tasks,
        }),
        _ => unreachable!("every missing piece leaves a diagnostic"),
    }
}

fn particle_block(b: &Block) -> Option<PolarizedParticle> {
    let mass = b.positive("mass", None);
    let moment = b.number("moment", None);
    let polarization = b.direction("polarization", None);
    let momentum = b.vec3("momentum", Some(Vector3::zeros()));
    b.finish();
    let p = PolarizedParticle::new(mass?, moment?, polarization?, momentum?);
    p.map_err(|e| b.range("", e.to_string())).ok()
}

fn axis(b: &Block) -> Option<Axis> {
    let point = b.vec3("axis_point", Some(Vector3::zeros()))?;
    let direction = b.direction("axis_direction", Some(Vector3::z()))?;
    Axis::new(point, direction).map_err(|e| b.range("axis_direction", e.to_string())).ok()
}

fn expressions(b: &Block, key: &str) -> Option<[Option<String>; 3]> {
    let v = match b.get(key) {
        None => return Some([None, None, None]),
        Some(v) => v,
    };
    let bad = || b.mistyped(key, "an array of three expression strings", v);
    let Value::Array(items) = v else {
        bad();
        return None;
    };
    if items.len() != 3 {
        b.range(key, format!("needs 3 entries, got {}", items.len()));
        return None;
    }
    let mut out: [Option<String>; 3] = [None, None, None];
    for (slot, item) in out.iter_mut().zip(items) {
        match item {
            Value::String(s) if s.trim().is_empty() => {}
            Value::String(s) => *slot = Some(s.clone()),
            _ => {
                bad();
                return None;
            }
        }
    }
    Some(out)
}

fn field_block(b: &Block) -> Option<FieldConfig> {
    let kind = b.choice("kind", &[("zero", 0), ("line_charge", 1), ("pulsed_uniform_b", 2), ("expression", 3)], None);
    let exclusion = b.table.contains_key("exclusion_radius").then(|| b.positive("exclusion_radius", None));
    let config = match kind? {
        0 => Some(FieldConfig::zero()),
        1 => {
            let density = b.number("density", None);
            let axis = axis(b);
            FieldConfig::line_charge(density?, axis?).map_err(|e| b.range("density", e.to_string())).ok()
        }
        2 => {
            let amplitude = b.vec3("amplitude", None);
            let t_on = b.number("t_on", None);
            let t_off = b.number("t_off", None);
            let envelope = b.choice(
                "envelope",
                &[("square", Envelope::Square), ("smooth", Envelope::Smooth)],
                Some(Envelope::Square),
            );
            FieldConfig::pulsed_uniform_b(amplitude?, t_on?, t_off?, envelope?)
                .map_err(|e| b.range("t_off", e.to_string()))
                .ok()
        }
        _ => {
            let e = expressions(b, "electric");
            let m = expressions(b, "magnetic");
            let (e, m) = (e?, m?);
            // Parse each component on its own so every bad expression is reported.
            let mut ok = true;
            for (key, set) in [("electric", &e), ("magnetic", &m)] {
                for (i, src) in set.iter().enumerate() {
                    if let Some(src) = src {
                        if let Err(err) = topophase::fields::parse_field_expression(src) {
                            b.diags.push(DiagnosticKind::SyntaxError, b.at(&format!("{key}[{i}]")), err.to_string());
                            ok = false;
                        }
                    }
                }
            }
            if !ok {
                return None;
            }
            ExpressionField::parse(e.each_ref().map(|c| c.as_deref()), m.each_ref().map(|c| c.as_deref()))
                .ok()
                .map(FieldConfig::expression)
        }
    };
    b.finish();
    let config = config?;
    match exclusion {
        None => Some(config),
        Some(r) => config.with_exclusion_radius(r?).map_err(|e| b.range("exclusion_radius", e.to_string())).ok(),
    }
}

fn timing(b: &Block, vertices: usize) -> Option<Timing> {
    let time = b.get("time");
    let start = b.get("start");
    let end = b.get("end");
    let times = b.get("times");
    match (time, start, end, times) {
        (_, None, None, None) => Some(Timing::Instant(b.number("time", Some(0.0))?)),
        (None, Some(_), Some(_), None) => {
            Some(Timing::Linear { start: b.number("start", None)?, end: b.number("end", None)? })
        }
        (None, None, None, Some(v)) => {
            let t = b.numbers("times", v, Some(vertices))?;
            Some(Timing::PerVertex(t))
        }
        _ => {
            b.range("time", "give exactly one of `time`, `start` + `end`, or `times`");
            None
        }
    }
}

fn path_block(b: &Block, base: &FsPath) -> Option<SpacetimePath> {
    let shape = b.choice("shape", &[("circle", 0), ("polyline", 1), ("stationary", 2), ("csv", 3)], None)?;
    let velocity = match b.get("velocity") {
        Some(_) => Some(b.vec3("velocity", None)?),
        None => None,
    };
    let built = match shape {
        0 => {
            let center = b.vec3("center", Some(Vector3::zeros()));
            let radius = b.positive("radius", None);
            let normal = b.direction("normal", Some(Vector3::z()));
            let winding = b.integer("winding", Some(1), -1000, 1000);
            let timing = timing(b, 0);
            let path = Path::circle(center?, radius?, normal?, winding? as i32);
            let path = path.map_err(|e| b.range("winding", e.to_string())).ok()?;
            SpacetimePath::new(path, timing?)
        }
        1 => {
            let vertices = b.vertices("vertices");
            let n = vertices.as_ref().map_or(0, Vec::len);
            let timing = timing(b, n);
            let path = Path::polyline(vertices?).map_err(|e| b.range("vertices", e.to_string())).ok()?;
            SpacetimePath::new(path, timing?)
        }
        2 => {
            let position = b.vec3("position", None);
            let start = b.number("start", None);
            let end = b.number("end", None);
            SpacetimePath::stationary(position?, start?, end?)
        }
        _ => {
            let file = b.string("file", None)?;
            let full = base.join(&file);
            match std::fs::File::open(&full) {
                Ok(f) => SpacetimePath::from_csv(f),
                Err(e) => {
                    b.range("file", format!("cannot read {}: {e}", full.display()));
                    return None;
                }
            }
        }
    };
    b.finish();
    let path = built.map_err(|e| b.range("", e.to_string())).ok()?;
    match velocity {
        Some(v) => path.with_velocity(v).map_err(|e| b.range("velocity", e.to_string())).ok(),
        None => Some(path),
    }
}

fn paths_block(root: &Block, base: &FsPath) -> BTreeMap<String, Option<SpacetimePath>> {
    let Some(block) = root.table("paths", false) else {
        return BTreeMap::new();
    };
    let mut out = BTreeMap::new();
    for (name, value) in block.table {
        block.used.borrow_mut().insert(name.as_str());
        let built = match value {
            Value::Table(t) => path_block(&Block::new(t, block.at(name), block.diags), base),
            v => {
                block.mistyped(name, "a path table", v);
                None
            }
        };
        out.insert(name.clone(), built);
    }
    out
}

fn valid_task_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn driver(b: &Block) -> Option<DriverSpec> {
    let kind = b.choice(
        "driver",
        &[("peshkin_lipkin", DriverKind::PeshkinLipkin), ("effective", DriverKind::Effective)],
        None,
    );
    let start = b.vec3("start", Some(Vector3::zeros()));
    let velocity = b.vec3("velocity", Some(Vector3::zeros()));
    let derivative_step = b.positive("derivative_step", Some(1e-4));
    let velocity = velocity?;
    if !(velocity.norm() < 1.0) {
        b.range("velocity", "must be subluminal");
        return None;
    }
    Some(DriverSpec { kind: kind?, start: start?, velocity, derivative_step: derivative_step? })
}

fn task_block(
    b: &Block,
    particle: Option<&PolarizedParticle>,
    field: Option<&FieldConfig>,
    paths: &BTreeMap<String, Option<SpacetimePath>>,
) -> Option<TaskSpec> {
    let name = b.string("name", None);
    if let Some(n) = &name {
        if !valid_task_name(n) {
            b.range("name", "task names use letters, digits, `_` and `-` only");
        }
    }
    let kind = b.choice(
        "kind",
        &[
            ("phase", 0),
            ("conditions", 1),
            ("evolve", 2),
            ("precession", 3),
            ("autocorrelation", 4),
            ("identity_checks", 5),
        ],
        None,
    );
    // Falls back to ẑ only so a broken particle block is not reported twice.
    let polarization = Some(particle.map_or(Vector3::z(), |p| p.polarization()));
    let task = match kind? {
        0 => {
            let path = b.string("path", None);
            let which = b.choice(
                "which",
                &[("open", PhaseKind::Open), ("ac", PhaseKind::Ac), ("sab", PhaseKind::Sab), ("flux", PhaseKind::Flux)],
                Some(PhaseKind::Open),
            );
            let tolerance = b.positive("tolerance", Some(1e-10));
            let velocity = b.vec3("velocity", Some(Vector3::zeros()));
            let path = path?;
            if !paths.contains_key(&path) {
                b.diags.push(DiagnosticKind::UnknownKey, b.at("path"), format!("undefined path `{path}`"));
                return None;
            }
            let velocity = velocity?;
            if !(velocity.norm() < 1.0) {
                b.range("velocity", "must be subluminal");
            }
            TaskKind::Phase { path, which: which?, tolerance: tolerance?, velocity }
        }
        1 => {
            let region = b.table("region", true);
            let tolerance = b.positive("tolerance", Some(1e-6));
            let step = b.positive("step", Some(1e-4));
            let region = region.and_then(|r| {
                let shape = r.choice("shape", &[("annulus", 0), ("box", 1)], None);
                let time = r.number("time", Some(0.0));
                let resolution = r.integer("resolution", Some(32), 2, MAX_RESOLUTION);
                let shape = match shape? {
                    0 => {
                        let axis = axis(&r);
                        let r_min = r.number("r_min", None);
                        let r_max = r.number("r_max", None);
                        let half_length = r.number("half_length", None);
                        RegionShape::Annulus { axis: axis?, r_min: r_min?, r_max: r_max?, half_length: half_length? }
                    }
                    _ => {
                        let min = r.vec3("min", None);
                        let max = r.vec3("max", None);
                        RegionShape::Box { min: min?, max: max? }
                    }
                };
                r.finish();
                SampleRegion::new(shape, time?, resolution? as usize).map_err(|e| r.range("", e.to_string())).ok()
            });
            TaskKind::Conditions { region: region?, tolerance: tolerance?, step: step? }
        }
        2 => {
            let d = InterferometerSetup::default();
            let width = b.positive("width", Some(d.width));
            let wavenumber = b.positive("wavenumber", Some(d.wavenumber));
            let half_length = b.positive("half_length", Some(d.half_length));
            let half_height = b.positive("half_height", Some(d.half_height));
            let half_box = b.positive("half_box", Some(d.half_box));
            let grid = b.integer("grid", Some(d.grid as i64), 16, MAX_GRID);
            let dt = b.positive("dt", Some(d.dt));
            let p = particle?;
            TaskKind::Evolve {
                setup: InterferometerSetup {
                    mass: p.mass(),
                    moment: p.moment(),
                    polarization: p.polarization(),
                    width: width?,
                    wavenumber: wavenumber?,
                    half_length: half_length?,
                    half_height: half_height?,
                    half_box: half_box?,
                    grid: grid? as usize,
                    dt: dt?,
                },
            }
        }
        3 => {
            let driver = driver(b);
            let t0 = b.number("t0", Some(0.0));
            let t1 = b.number("t1", None);
            let steps = b.integer("steps", None, 1, MAX_STEPS);
            let initial = b.direction("initial", polarization);
            let stride = b.integer("stride", Some(1), 1, MAX_STEPS);
            let (t0, t1) = (t0?, t1?);
            if !(t1 > t0) {
                b.range("t1", "must be later than t0");
                return None;
            }
            TaskKind::Precession {
                driver: driver?,
                t0,
                t1,
                steps: steps? as usize,
                initial: initial?,
                stride: stride? as usize,
            }
        }
        4 => {
            let driver = driver(b);
            let t_i = b.number("t_i", None);
            let t_f = b.number("t_f", None);
            let state = b.direction("state", polarization);
            let (t_i, t_f) = (t_i?, t_f?);
            if !(t_f >= t_i) {
                b.range("t_f", "must not precede t_i");
                return None;
            }
            TaskKind::Autocorrelation { driver: driver?, t_i, t_f, state: state? }
        }
        _ => {
            let trials = b.integer("trials", None, 1, MAX_TRIALS);
            let event = b.get("event").map(|v| b.numbers("event", v, Some(4)));
            let event = match event {
                None => FourVector::new(0.0, 1.0, 0.0, 0.0),
                Some(e) => {
                    let e = e?;
                    FourVector::new(e[0], e[1], e[2], e[3])
                }
            };
            if let Some(f) = field {
                if let Err(e) = f.sample(&event) {
                    b.range("event", e.to_string());
                }
            }
            TaskKind::IdentityChecks { trials: trials? as usize, event }
        }
    };
    b.finish();
    Some(TaskSpec { name: name?, kind: task })
}

fn tasks_block(
    root: &Block,
    particle: Option<&PolarizedParticle>,
    field: Option<&FieldConfig>,
    paths: &BTreeMap<String, Option<SpacetimePath>>,
) -> Option<Vec<TaskSpec>> {
    let items = match root.get("tasks") {
        None => {
            root.missing("tasks");
            return None;
        }
        Some(Value::Array(items)) if !items.is_empty() => items,
        Some(v) => {
            root.mistyped("tasks", "a non-empty array of task tables", v);
            return None;
        }
    };
    let mut out = Vec::new();
    let mut names = BTreeSet::new();
    let mut ok = true;
    for (i, item) in items.iter().enumerate() {
        let path = format!("tasks[{i}]");
        let Value::Table(t) = item else {
            root.diags.push(DiagnosticKind::SyntaxError, path, format!("expected a table, found {}", type_name(item)));
            ok = false;
            continue;
        };
        match task_block(&Block::new(t, path.clone(), root.diags), particle, field, paths) {
            Some(task) => {
                if !names.insert(task.name.clone()) {
                    root.diags.push(
                        DiagnosticKind::RangeViolation,
                        format!("{path}.name"),
                        format!("duplicate task name `{}`", task.name),
                    );
                }
                out.push(task);
            }
            None => ok = false,
        }
    }
    ok.then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> Result<Scenario, Vec<Diagnostic>> {
        parse_scenario(src, FsPath::new("."))
    }

    const MINIMAL: &str = r#"
        name = "mini"
        [particle]
        mass = 1.0
        moment = 1.0
        polarization = [0, 0, 1]
        [field]
        kind = "line_charge"
        density = 1.0
        [paths.loop]
        shape = "circle"
        radius = 2.0
        [[tasks]]
        name = "ac"
        kind = "phase"
        path = "loop"
        which = "ac"
    "#;

    #[test]
    fn minimal_ac_scenario() {
        let s = parse(MINIMAL).unwrap();
        assert_eq!(s.name, "mini");
        assert_eq!(s.tasks.len(), 1);
        assert!(matches!(s.tasks[0].kind, TaskKind::Phase { which: PhaseKind::Ac, .. }));
    }

    #[test]
    fn undefined_path_is_named() {
        let src = MINIMAL.replace("path = \"loop\"", "path = \"nowhere\"");
        let d = parse(&src).unwrap_err();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagnosticKind::UnknownKey);
        assert_eq!(d[0].path, "tasks[0].path");
        assert!(d[0].message.contains("nowhere"));
    }

    #[test]
    fn oversized_grid_is_a_range_violation() {
        let src = format!("{MINIMAL}\n[[tasks]]\nname = \"big\"\nkind = \"evolve\"\ngrid = 4096\n");
        let d = parse(&src).unwrap_err();
        assert!(d.iter().any(|d| d.kind == DiagnosticKind::RangeViolation && d.path == "tasks[1].grid"), "{d:?}");
    }

    #[test]
    fn empty_file_misses_particle() {
        let d = parse("").unwrap_err();
        assert!(d.iter().any(|d| d.kind == DiagnosticKind::MissingBlock && d.path == "particle"));
    }

    #[test]
    fn collects_every_problem() {
        let src = MINIMAL.replace("mass = 1.0", "mass = -1.0\ncolour = \"red\"");
        let d = parse(&src).unwrap_err();
        assert!(d.iter().any(|d| d.kind == DiagnosticKind::RangeViolation && d.path == "particle.mass"));
        assert!(d.iter().any(|d| d.kind == DiagnosticKind::UnknownKey && d.path == "particle.colour"));
    }

    #[test]
    fn syntax_error_has_a_location() {
        let d = parse("[particle\nmass = 1").unwrap_err();
        assert_eq!(d[0].kind, DiagnosticKind::SyntaxError);
        assert!(d[0].path.starts_with("line 1"), "{}", d[0].path);
    }

    #[test]
    fn bad_field_expression_points_at_component() {
        let src = MINIMAL.replace(
            "kind = \"line_charge\"\n        density = 1.0",
            "kind = \"expression\"\n        electric = [\"x +\", \"\", \"sin(y)\"]",
        );
        let d = parse(&src).unwrap_err();
        assert_eq!(d[0].kind, DiagnosticKind::SyntaxError);
        assert_eq!(d[0].path, "field.electric[0]");
    }
}
