//! Scenario files: a YAML description of the graph, grid, initial datum,
//! time stepping, observation and experiment parameters.
//!
//! Parsing is strict (unknown keys are errors). After parsing every optional
//! field that has a default is filled in, so two files describing the same
//! run hash to the same value.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::de::value::{MapAccessDeserializer, SeqAccessDeserializer};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::function::GraphFunction;
use crate::graph::{EdgeSpec, GraphPoint, GraphSpec, MetricGraph};
use crate::grid::{Grid, GridSpec};
use crate::kernels::{builtin_kernel, Kernel, KernelParams};
use crate::local::Scheme;
use crate::nonlocal::NonlocalScheme;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Local,
    Nonlocal,
    Decay,
    Profile,
    Relax,
    Distance,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Local => "local",
            ExperimentKind::Nonlocal => "nonlocal",
            ExperimentKind::Decay => "decay",
            ExperimentKind::Profile => "profile",
            ExperimentKind::Relax => "relax",
            ExperimentKind::Distance => "distance",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "local" => ExperimentKind::Local,
            "nonlocal" => ExperimentKind::Nonlocal,
            "decay" => ExperimentKind::Decay,
            "profile" => ExperimentKind::Profile,
            "relax" => ExperimentKind::Relax,
            "distance" => ExperimentKind::Distance,
            other => return Err(Error::InvalidParameter(format!("unknown experiment kind `{other}`"))),
        })
    }
}

/// An `Lᵖ` exponent: a number `≥ 1` or `inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponent(pub f64);

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let p = match s.trim().to_ascii_lowercase().as_str() {
            "inf" | ".inf" | "infinity" => f64::INFINITY,
            other => other
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad exponent `{s}`")))?,
        };
        if !(p >= 1.0) {
            return Err(Error::InvalidParameter(format!("exponent must be at least 1, got {s}")));
        }
        Ok(Exponent(p))
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Num(x) => x.to_string(),
            Raw::Text(s) => s,
        };
        text.parse().map_err(de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// `(m/w)·cos²(π(x−c)/2w)` on `|x − c| < w`.
    Bump,
    /// `m·N(c, w²)` restricted to the edge.
    Gaussian,
    /// `m/(2w)` on `[c − w, c + w]`.
    Indicator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialComponent {
    pub kind: InitialKind,
    pub edge: usize,
    pub center: f64,
    pub width: f64,
    #[serde(default = "one")]
    pub mass: f64,
}

fn one() -> f64 {
    1.0
}

/// One component or a list of them.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct InitialSpec(pub Vec<InitialComponent>);

impl<'de> Deserialize<'de> for InitialSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct OneOrMany;
        impl<'de> Visitor<'de> for OneOrMany {
            type Value = InitialSpec;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an initial-datum component or a list of them")
            }

            fn visit_map<A: de::MapAccess<'de>>(self, map: A) -> std::result::Result<InitialSpec, A::Error> {
                InitialComponent::deserialize(MapAccessDeserializer::new(map)).map(|c| InitialSpec(vec![c]))
            }

            fn visit_seq<A: de::SeqAccess<'de>>(self, seq: A) -> std::result::Result<InitialSpec, A::Error> {
                Vec::<InitialComponent>::deserialize(SeqAccessDeserializer::new(seq)).map(InitialSpec)
            }
        }
        d.deserialize_any(OneOrMany)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    ImplicitEuler,
    CrankNicolson,
    ExplicitEuler,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    /// Defaults to the experiment horizon (1 for plain runs).
    #[serde(rename = "T", default)]
    pub t_final: Option<f64>,
    /// Defaults to `T/2000`.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Defaults to Crank–Nicolson for the heat equation and implicit Euler
    /// for the nonlocal equation.
    #[serde(default)]
    pub scheme: Option<TimeScheme>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Mass,
    L1,
    L2,
    Linf,
    GradL2,
    Energy,
}

impl Quantity {
    pub fn column(self) -> &'static str {
        match self {
            Quantity::Mass => "mass",
            Quantity::L1 => "l1",
            Quantity::L2 => "l2",
            Quantity::Linf => "linf",
            Quantity::GradL2 => "grad_l2",
            Quantity::Energy => "energy",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserveSpec {
    /// Defaults to 21 evenly spaced times over `[0, T]`.
    #[serde(default)]
    pub times: Vec<f64>,
    /// Defaults to every quantity the solver provides.
    #[serde(default)]
    pub quantities: Vec<Quantity>,
    /// Write `u_t<t>.csv` at every observation time.
    #[serde(default)]
    pub snapshots: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub name: String,
    #[serde(default)]
    pub height: Option<f64>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Rescale so that `½∫z²J = 1`.
    #[serde(default)]
    pub normalize: bool,
}

impl KernelSpec {
    pub fn build(&self) -> Result<Kernel> {
        let k = builtin_kernel(
            &self.name,
            &KernelParams {
                height: self.height,
                radius: self.radius,
                sigma: self.sigma,
            },
        )?;
        if self.normalize {
            k.normalize_unit_second_moment()
        } else {
            Ok(k)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Local,
    Nonlocal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySpec {
    #[serde(default = "default_window")]
    pub window: [f64; 2],
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_solver")]
    pub solver: Solver,
    #[serde(default = "default_exponents")]
    pub p: Vec<Exponent>,
}

fn default_window() -> [f64; 2] {
    [10.0, 100.0]
}

fn default_samples() -> usize {
    11
}

fn default_solver() -> Solver {
    Solver::Local
}

fn default_exponents() -> Vec<Exponent> {
    vec![Exponent(1.0), Exponent(2.0), Exponent(f64::INFINITY)]
}

impl Default for DecaySpec {
    fn default() -> Self {
        Self {
            window: default_window(),
            samples: default_samples(),
            solver: default_solver(),
            p: default_exponents(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    #[serde(default = "default_profile_times")]
    pub times: Vec<f64>,
    #[serde(default = "default_exponents")]
    pub p: Vec<Exponent>,
    #[serde(default = "default_solver")]
    pub solver: Solver,
}

fn default_profile_times() -> Vec<f64> {
    vec![10.0, 40.0, 160.0]
}

impl Default for ProfileSpec {
    fn default() -> Self {
        Self {
            times: default_profile_times(),
            p: default_exponents(),
            solver: default_solver(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxSpec {
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
}

fn default_eps() -> Vec<f64> {
    vec![0.4, 0.2, 0.1]
}

impl Default for RelaxSpec {
    fn default() -> Self {
        Self { eps: default_eps() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceSpec {
    /// Point pairs written as `edge:coord`.
    #[serde(default)]
    pub pairs: Vec<[String; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeSpec>,
    #[serde(default)]
    pub strict_topology: bool,
    #[serde(default)]
    pub allow_compact: bool,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub time: Option<TimeSpec>,
    #[serde(default)]
    pub observe: ObserveSpec,
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub decay: Option<DecaySpec>,
    #[serde(default)]
    pub profile: Option<ProfileSpec>,
    #[serde(default)]
    pub relax: Option<RelaxSpec>,
    #[serde(default)]
    pub distance: Option<DistanceSpec>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// Line (1-based) of the first `key:` entry in `text`, block or flow style.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let is_key_at = |l: &str, i: usize| {
        let before_ok = l[..i]
            .chars()
            .next_back()
            .is_none_or(|c| !(c.is_alphanumeric() || c == '_'));
        before_ok && l[i + key.len()..].trim_start().starts_with(':')
    };
    text.lines()
        .position(|l| l.match_indices(key).any(|(i, _)| is_key_at(l, i)))
        .map(|i| i + 1)
}

struct Located<'a> {
    path: &'a Path,
    text: &'a str,
}

impl Located<'_> {
    fn err(&self, key: &str, message: impl fmt::Display) -> Error {
        let message = match line_of(self.text, key) {
            Some(line) => format!("line {line}: `{key}`: {message}"),
            None => format!("`{key}`: {message}"),
        };
        Error::Scenario {
            path: self.path.to_path_buf(),
            message,
        }
    }
}

pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    parse_scenario_as(path, None)
}

/// Parses a scenario, replacing its experiment kind by `kind` before
/// defaults are filled in.
pub fn parse_scenario_as(path: &Path, kind: Option<ExperimentKind>) -> Result<Scenario> {
    parse_scenario_with(path, kind, |_| {})
}

/// Like [`parse_scenario_as`], with `adjust` applied to the raw scenario
/// before defaults and validation (command-line overrides).
pub fn parse_scenario_with(
    path: &Path,
    kind: Option<ExperimentKind>,
    adjust: impl FnOnce(&mut Scenario),
) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_scenario_text(&text, path, kind, adjust)
}

/// Parses and validates scenario text; `path` is used in messages only.
pub fn parse_scenario_str(text: &str, path: &Path) -> Result<Scenario> {
    parse_scenario_text(text, path, None, |_| {})
}

fn parse_scenario_text(
    text: &str,
    path: &Path,
    kind: Option<ExperimentKind>,
    adjust: impl FnOnce(&mut Scenario),
) -> Result<Scenario> {
    let mut s: Scenario = serde_yaml::from_str(text).map_err(|e| Error::Scenario {
        path: path.to_path_buf(),
        message: match e.location() {
            Some(loc) if !e.to_string().contains("line ") => format!("line {}: {e}", loc.line()),
            _ => e.to_string(),
        },
    })?;
    if kind.is_some() {
        s.experiment = kind;
    }
    adjust(&mut s);
    s.fill_defaults();
    s.validate(&Located { path, text })?;
    Ok(s)
}

impl Scenario {
    pub fn kind(&self) -> ExperimentKind {
        self.experiment.unwrap_or(ExperimentKind::Local)
    }

    pub fn graph_spec(&self) -> GraphSpec {
        GraphSpec {
            vertices: self.vertices.clone(),
            edges: self.edges.clone(),
            strict_topology: self.strict_topology,
            allow_compact: self.allow_compact,
        }
    }

    pub fn build_graph(&self) -> Result<MetricGraph> {
        self.graph_spec().build()
    }

    pub fn build_grid(&self, g: &MetricGraph) -> Result<Arc<Grid>> {
        Grid::new(g, &self.grid).map(Arc::new)
    }

    pub fn build_kernel(&self) -> Result<Option<Kernel>> {
        self.kernel.as_ref().map(KernelSpec::build).transpose()
    }

    pub fn t_final(&self) -> f64 {
        self.time.as_ref().and_then(|t| t.t_final).unwrap_or(1.0)
    }

    /// The configured step, or `1/2000` of the horizon.
    pub fn dt(&self) -> f64 {
        self.time
            .as_ref()
            .and_then(|t| t.dt)
            .unwrap_or_else(|| self.horizon() / 2000.0)
    }

    pub fn local_scheme(&self) -> Result<Scheme> {
        match self.time.as_ref().and_then(|t| t.scheme) {
            None | Some(TimeScheme::CrankNicolson) => Ok(Scheme::CrankNicolson),
            Some(TimeScheme::ImplicitEuler) => Ok(Scheme::ImplicitEuler),
            Some(TimeScheme::ExplicitEuler) => Err(Error::InvalidParameter(
                "explicit Euler is not available for the heat equation".into(),
            )),
        }
    }

    pub fn nonlocal_scheme(&self) -> Result<NonlocalScheme> {
        match self.time.as_ref().and_then(|t| t.scheme) {
            None | Some(TimeScheme::ImplicitEuler) => Ok(NonlocalScheme::ImplicitEuler),
            Some(TimeScheme::ExplicitEuler) => Ok(NonlocalScheme::ExplicitEuler),
            Some(TimeScheme::CrankNicolson) => Err(Error::InvalidParameter(
                "Crank-Nicolson is not available for the nonlocal equation".into(),
            )),
        }
    }

    /// The longest time any part of the experiment integrates to.
    pub fn horizon(&self) -> f64 {
        match self.kind() {
            ExperimentKind::Decay => self.decay.as_ref().map_or(100.0, |d| d.window[1]),
            ExperimentKind::Profile => self
                .profile
                .as_ref()
                .map_or(160.0, |p| p.times.iter().copied().fold(0.0, f64::max)),
            _ => self.t_final(),
        }
    }

    /// Whether the experiment runs the nonlocal solver.
    pub fn uses_kernel(&self) -> bool {
        match self.kind() {
            ExperimentKind::Nonlocal | ExperimentKind::Relax => true,
            ExperimentKind::Decay => self.decay.as_ref().is_some_and(|d| d.solver == Solver::Nonlocal),
            ExperimentKind::Profile => self.profile.as_ref().is_some_and(|d| d.solver == Solver::Nonlocal),
            _ => false,
        }
    }

    fn fill_defaults(&mut self) {
        let kind = self.kind();
        self.experiment = Some(kind);
        let default_t = match kind {
            ExperimentKind::Decay | ExperimentKind::Profile => self.horizon(),
            _ => 1.0,
        };
        if let Some(t) = self.time.as_mut() {
            let t_final = *t.t_final.get_or_insert(default_t);
            if t.dt.is_none() {
                t.dt = Some(t_final / 2000.0);
            }
        }
        let uses_kernel = self.uses_kernel();
        if let Some(t) = self.time.as_mut() {
            if t.scheme.is_none() {
                t.scheme = Some(if uses_kernel || kind == ExperimentKind::Relax {
                    TimeScheme::ImplicitEuler
                } else {
                    TimeScheme::CrankNicolson
                });
            }
        }
        match kind {
            ExperimentKind::Decay if self.decay.is_none() => self.decay = Some(DecaySpec::default()),
            ExperimentKind::Profile if self.profile.is_none() => self.profile = Some(ProfileSpec::default()),
            ExperimentKind::Relax if self.relax.is_none() => self.relax = Some(RelaxSpec::default()),
            _ => {}
        }
        if kind == ExperimentKind::Relax && self.time.is_none() {
            self.time = Some(TimeSpec {
                t_final: Some(1.0),
                dt: Some(1.0 / 2000.0),
                scheme: Some(TimeScheme::ImplicitEuler),
            });
        }
        if matches!(kind, ExperimentKind::Local | ExperimentKind::Nonlocal) {
            if self.observe.times.is_empty() {
                let t = self.t_final();
                self.observe.times = (0..=20).map(|k| t * k as f64 / 20.0).collect();
            }
            if self.observe.quantities.is_empty() {
                self.observe.quantities = vec![Quantity::Mass, Quantity::L1, Quantity::L2, Quantity::Linf];
                self.observe.quantities.push(if kind == ExperimentKind::Local {
                    Quantity::GradL2
                } else {
                    Quantity::Energy
                });
            }
            self.observe.quantities.sort();
            self.observe.quantities.dedup();
        }
    }

    fn validate(&self, at: &Located) -> Result<()> {
        let kind = self.kind();
        let g = self.build_graph().map_err(|e| at.err("edges", e))?;
        let grid = self.build_grid(&g).map_err(|e| at.err("grid", e))?;

        if kind != ExperimentKind::Distance {
            let initial = self
                .initial
                .as_ref()
                .ok_or_else(|| at.err("initial", "an initial datum is required"))?;
            for c in &initial.0 {
                if c.edge >= g.num_edges() {
                    return Err(at.err("edge", format!("edge {} does not exist", c.edge)));
                }
                let len = g.edge(crate::graph::EdgeId(c.edge)).length;
                let reach = if len.is_finite() { len } else { grid.l_trunc() };
                if !(c.center >= 0.0 && c.center <= reach) {
                    return Err(at.err("center", format!("center {} lies outside edge {}", c.center, c.edge)));
                }
                if !(c.width > 0.0 && c.width.is_finite()) {
                    return Err(at.err("width", format!("width must be positive, got {}", c.width)));
                }
                if !c.mass.is_finite() {
                    return Err(at.err("mass", "mass must be finite"));
                }
            }
        }
        if let Some(t) = &self.time {
            let t_final = t.t_final.unwrap_or(1.0);
            if !(t_final > 0.0 && t_final.is_finite()) {
                return Err(at.err("T", format!("final time must be positive, got {t_final}")));
            }
            if let Some(dt) = t.dt {
                if !(dt > 0.0 && dt <= t_final.max(self.horizon())) {
                    return Err(at.err("dt", format!("time step must lie in (0, T], got {dt}")));
                }
            }
        } else if matches!(kind, ExperimentKind::Local | ExperimentKind::Nonlocal) {
            return Err(at.err("time", "a time section is required"));
        }
        match kind {
            ExperimentKind::Local | ExperimentKind::Decay | ExperimentKind::Profile if !self.uses_kernel() => {
                self.local_scheme().map_err(|e| at.err("scheme", e))?;
            }
            ExperimentKind::Distance => {}
            _ => {
                self.nonlocal_scheme().map_err(|e| at.err("scheme", e))?;
            }
        }

        for &t in &self.observe.times {
            if !(t >= 0.0 && t <= self.t_final() * (1.0 + 1e-12)) {
                return Err(at.err("times", format!("observation time {t} lies outside [0, T]")));
            }
        }
        for q in &self.observe.quantities {
            let ok = match q {
                Quantity::GradL2 => kind == ExperimentKind::Local,
                Quantity::Energy => kind == ExperimentKind::Nonlocal,
                _ => true,
            };
            if !ok {
                return Err(at.err("quantities", format!("`{}` is not available for {kind} runs", q.column())));
            }
        }

        let mut extra = 0.0;
        if self.uses_kernel() {
            let k = self
                .build_kernel()
                .map_err(|e| at.err("kernel", e))?
                .ok_or_else(|| at.err("kernel", "this experiment needs a kernel"))?;
            let eps_list: Vec<f64> = if kind == ExperimentKind::Relax {
                self.relax.as_ref().map(|r| r.eps.clone()).unwrap_or_default()
            } else {
                vec![self.epsilon.unwrap_or(1.0)]
            };
            for eps in eps_list {
                if !(eps > 0.0 && eps.is_finite()) {
                    return Err(at.err("epsilon", format!("epsilon must be positive, got {eps}")));
                }
                let support = k.rescaled_support(eps);
                if support < 2.0 * grid.max_h() * (1.0 - 1e-12) {
                    return Err(at.err(
                        "epsilon",
                        Error::KernelUnresolved {
                            support,
                            h: grid.max_h(),
                        },
                    ));
                }
                extra = f64::max(extra, support);
            }
        }

        if let Some(d) = &self.decay {
            if !(d.window[0] > 0.0 && d.window[1] > d.window[0]) {
                return Err(at.err("window", "window must satisfy 0 < t0 < t1"));
            }
            if d.samples < 5 {
                return Err(at.err("samples", format!("need at least 5 samples, got {}", d.samples)));
            }
        }
        if let Some(p) = &self.profile {
            if p.times.is_empty() || p.times.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
                return Err(at.err("times", "profile times must be positive"));
            }
        }
        if let Some(d) = &self.distance {
            for pair in &d.pairs {
                for s in pair {
                    let p: GraphPoint = s.parse().map_err(|e| at.err("pairs", e))?;
                    g.validate_point(p).map_err(|e| at.err("pairs", e))?;
                }
            }
        }

        if kind != ExperimentKind::Distance && g.num_infinite() > 0 {
            let horizon = self.horizon();
            let need = 10.0 * horizon.sqrt() + extra;
            if need > grid.l_trunc() * (1.0 + 1e-12) {
                return Err(at.err(
                    "L_trunc",
                    format!(
                        "truncation length {} is too short for T = {horizon}: need 10*sqrt(T){} = {need}",
                        grid.l_trunc(),
                        if extra > 0.0 { " + kernel support" } else { "" }
                    ),
                ));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the filled scenario. The output
    /// directory does not take part.
    pub fn hash(&self) -> String {
        let canonical = Scenario {
            out: None,
            ..self.clone()
        };
        let json = serde_json::to_string(&canonical).expect("scenario serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Cell averages of the initial datum on `grid`.
    pub fn initial_datum(&self, grid: Arc<Grid>) -> Result<GraphFunction> {
        let components = self
            .initial
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("scenario has no initial datum".into()))?;
        build_initial(grid, &components.0)
    }
}

pub fn build_initial(grid: Arc<Grid>, components: &[InitialComponent]) -> Result<GraphFunction> {
    let mut values = vec![0.0; grid.len()];
    for c in components {
        if c.edge >= grid.edges().len() {
            return Err(Error::InvalidParameter(format!("edge {} does not exist", c.edge)));
        }
        let ec = &grid.edges()[c.edge];
        let (center, w, m) = (c.center, c.width, c.mass);
        for k in 0..ec.cells {
            let (lo, hi) = (k as f64 * ec.h, (k + 1) as f64 * ec.h);
            let avg = match c.kind {
                InitialKind::Indicator => {
                    let overlap = (hi.min(center + w) - lo.max(center - w)).max(0.0);
                    m / (2.0 * w) * overlap / ec.h
                }
                InitialKind::Bump => {
                    if hi <= center - w || lo >= center + w {
                        0.0
                    } else {
                        // exact antiderivative of cos² over the overlap
                        let a = lo.max(center - w) - center;
                        let b = hi.min(center + w) - center;
                        let k = std::f64::consts::PI / (2.0 * w);
                        let prim = |s: f64| 0.5 * s + (2.0 * k * s).sin() / (4.0 * k);
                        m / w * (prim(b) - prim(a)) / ec.h
                    }
                }
                InitialKind::Gaussian => {
                    let cdf = |x: f64| 0.5 * libm::erfc(-(x - center) / (w * std::f64::consts::SQRT_2));
                    m * (cdf(hi) - cdf(lo)) / ec.h
                }
            };
            values[ec.offset + k] += avg;
        }
    }
    GraphFunction::from_values(grid, values)
}
