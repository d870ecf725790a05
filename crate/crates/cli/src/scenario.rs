//! Scenario files: TOML with a `[model]` table, `[[colors]]`, `[[schedule]]`
//! and a `[task]` table selected by `kind`.
//!
//! Parsing fills every default, so emitting a parsed scenario records the
//! full configuration and re-parsing the emitted text reproduces it exactly.

use std::fmt;
use std::str::FromStr;

use ion_control::dynamics::{PulseSchedule, Segment};
use ion_control::model::{FieldColor, IonConfig, Sideband, SystemModel, TrapConfig};
use ion_control::quantum::{BasisState, Spin, StateVector};
use ion_control::special::{laguerre_zeros, LaguerreSpec};
use ion_control::C64;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid {field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl fmt::Display) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Prefix of every output file name.
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSection,
    #[serde(default)]
    pub colors: Vec<ColorSection>,
    #[serde(default)]
    pub schedule: Vec<SegmentSection>,
    pub task: Task,
}

fn default_output() -> String {
    "out".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub ions: usize,
    pub cutoff: usize,
    pub lamb_dicke: LambDicke,
    #[serde(default = "one")]
    pub mode_freq: f64,
    /// Defaults to 1 for every ion.
    #[serde(default)]
    pub participation: Vec<f64>,
    #[serde(default)]
    pub ldl: bool,
    #[serde(default = "yes")]
    pub addressable: bool,
    #[serde(default = "default_splitting")]
    pub qubit_splitting: f64,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn default_splitting() -> f64 {
    100.0
}

/// `η` given directly or as `√x` for the `index`-th root `x` of `L_n^α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambDicke {
    Value(f64),
    Zero { laguerre_zero: ZeroRef },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroRef {
    pub n: usize,
    pub alpha: usize,
    #[serde(default)]
    pub index: usize,
}

impl LambDicke {
    pub fn resolve(&self) -> Result<f64, ScenarioError> {
        match self {
            LambDicke::Value(eta) => Ok(*eta),
            LambDicke::Zero { laguerre_zero: z } => {
                let roots = laguerre_zeros(LaguerreSpec::new(z.n, z.alpha));
                roots
                    .get(z.index)
                    .map(|x| x.sqrt())
                    .ok_or_else(|| invalid("model.lamb_dicke.laguerre_zero.index", format!("L_{}^{} has {} roots", z.n, z.alpha, roots.len())))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColorSection {
    /// Zero-based ion index.
    pub target_ion: usize,
    pub sideband: String,
    #[serde(default = "one")]
    pub rabi: f64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub detuning: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSection {
    pub duration: f64,
    /// `[rabi, phase]` for each color; defaults to the colors' own values.
    #[serde(default)]
    pub amplitudes: Vec<[f64; 2]>,
}

/// One basis amplitude: `spins` reads one `u`/`d` per ion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateTerm {
    pub spins: String,
    pub n: usize,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// One spin-space amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinTerm {
    pub spins: String,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Task {
    Zeros {
        n: usize,
        alpha: usize,
        #[serde(default)]
        curve_min: f64,
        /// Defaults to the root scan bound `4n + 2α + 2`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        curve_max: Option<f64>,
        #[serde(default = "default_points")]
        curve_points: usize,
    },
    Matelem {
        /// Defaults to the model's `η`.
        #[serde(default)]
        etas: Vec<f64>,
        #[serde(default = "default_max_n")]
        max_n: usize,
        #[serde(default = "yes")]
        oracle: bool,
    },
    Graph {
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    Liealg {
        #[serde(default = "default_lie_tol")]
        tol: f64,
        /// 0 means the full `d²`.
        #[serde(default)]
        max_dim: usize,
        #[serde(default)]
        include_drift: bool,
        /// Both phase quadratures of each color, or only `R + R†`.
        #[serde(default = "yes")]
        quadratures: bool,
        /// Work inside the closed component of the ground state when one exists.
        #[serde(default = "yes")]
        restrict: bool,
    },
    Evolve {
        #[serde(default = "default_samples")]
        samples_per_segment: usize,
        /// Defaults to `|↓…↓,0⟩`.
        #[serde(default)]
        initial: Vec<StateTerm>,
        /// Also run the time-dependent reference integrator with this step when positive.
        #[serde(default)]
        oracle_dt: f64,
    },
    Laweberly {
        target: Vec<StateTerm>,
        #[serde(default = "default_red")]
        sideband: String,
        #[serde(default = "one")]
        rabi: f64,
    },
    Optimize {
        /// `state` or `spin`.
        objective: String,
        #[serde(default)]
        initial: Vec<StateTerm>,
        #[serde(default)]
        target: Vec<StateTerm>,
        #[serde(default)]
        target_spin: Vec<SpinTerm>,
        #[serde(default = "default_purity")]
        purity_floor: f64,
        #[serde(default = "default_population")]
        population: usize,
        #[serde(default = "default_elite")]
        elite: usize,
        #[serde(default = "default_initial_scale")]
        initial_scale: f64,
        #[serde(default = "default_decay")]
        decay: f64,
        #[serde(default = "default_stagnation")]
        stagnation_limit: usize,
        #[serde(default = "default_generations")]
        max_generations: usize,
        #[serde(default = "one")]
        target_score: f64,
        /// Defaults to `0.2 ω_m`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rabi_max: Option<f64>,
        /// Defaults to `400 / rabi_max`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_max: Option<f64>,
        #[serde(default = "default_segments")]
        segments: usize,
    },
}

fn default_points() -> usize {
    1001
}
fn default_max_n() -> usize {
    12
}
fn default_threshold() -> f64 {
    ion_control::connectivity::DEFAULT_THRESHOLD
}
fn default_lie_tol() -> f64 {
    ion_control::controllability::DEFAULT_TOL
}
fn default_samples() -> usize {
    10
}
fn default_red() -> String {
    "red".into()
}
fn default_purity() -> f64 {
    0.99
}
fn default_population() -> usize {
    32
}
fn default_elite() -> usize {
    8
}
fn default_initial_scale() -> f64 {
    0.3
}
fn default_decay() -> f64 {
    0.97
}
fn default_stagnation() -> usize {
    50
}
fn default_generations() -> usize {
    2000
}
fn default_segments() -> usize {
    1
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::Zeros { .. } => "zeros",
            Task::Matelem { .. } => "matelem",
            Task::Graph { .. } => "graph",
            Task::Liealg { .. } => "liealg",
            Task::Evolve { .. } => "evolve",
            Task::Laweberly { .. } => "laweberly",
            Task::Optimize { .. } => "optimize",
        }
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl FromStr for Scenario {
    type Err = ScenarioError;

    fn from_str(text: &str) -> Result<Self, ScenarioError> {
        parse_scenario(text)
    }
}

/// Parses, fills defaults and validates.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut scenario: Scenario = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        ScenarioError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    scenario.fill_defaults();
    scenario.validate()?;
    Ok(scenario)
}

/// Canonical text of a scenario.
pub fn emit_scenario(scenario: &Scenario) -> String {
    toml::to_string(scenario).expect("scenario serializes")
}

fn parse_spins(field: &str, spins: &str, ions: usize) -> Result<Vec<Spin>, ScenarioError> {
    if spins.chars().count() != ions {
        return Err(invalid(field, format!("{spins:?} needs one u/d per ion ({ions})")));
    }
    spins
        .chars()
        .map(|c| match c {
            'u' => Ok(Spin::Up),
            'd' => Ok(Spin::Down),
            other => Err(invalid(field, format!("unknown spin {other:?}, use u or d"))),
        })
        .collect()
}

fn normalize(field: &str, v: StateVector) -> Result<StateVector, ScenarioError> {
    let n = v.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(invalid(field, "state has zero norm"));
    }
    if (n - 1.0).abs() > 1e-6 {
        return Err(invalid(field, format!("state norm is {n}, expected 1")));
    }
    Ok(&v / C64::new(n, 0.0))
}

impl Scenario {
    fn fill_defaults(&mut self) {
        if self.model.participation.is_empty() {
            self.model.participation = vec![1.0; self.model.ions];
        }
        let colors = self.colors.clone();
        for seg in &mut self.schedule {
            if seg.amplitudes.is_empty() {
                seg.amplitudes = colors.iter().map(|c| [c.rabi, c.phase]).collect();
            }
        }
        let mode_freq = self.model.mode_freq;
        match &mut self.task {
            Task::Zeros { n, alpha, curve_max, .. } => {
                curve_max.get_or_insert((4 * *n + 2 * *alpha + 2) as f64);
            }
            Task::Optimize { rabi_max, t_max, .. } => {
                let r = *rabi_max.get_or_insert(0.2 * mode_freq);
                t_max.get_or_insert(400.0 / r);
            }
            _ => {}
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let m = &self.model;
        if !(1..=2).contains(&m.ions) {
            return Err(invalid("model.ions", "must be 1 or 2"));
        }
        if m.participation.len() != m.ions {
            return Err(invalid("model.participation", "needs one entry per ion"));
        }
        if self.output.is_empty() || self.output.contains(['/', '\\']) {
            return Err(invalid("output", "must be a plain file-name prefix"));
        }
        self.system_model()?;
        for (i, c) in self.colors.iter().enumerate() {
            if c.target_ion >= m.ions {
                return Err(invalid(format!("colors[{i}].target_ion"), format!("ion {} not defined ({} ions)", c.target_ion, m.ions)));
            }
            Sideband::from_str(&c.sideband).map_err(|e| invalid(format!("colors[{i}].sideband"), e))?;
            if !(c.rabi >= 0.0 && c.rabi.is_finite()) {
                return Err(invalid(format!("colors[{i}].rabi"), "must be nonnegative"));
            }
        }
        for (i, s) in self.schedule.iter().enumerate() {
            if !(s.duration > 0.0 && s.duration.is_finite()) {
                return Err(invalid(format!("schedule[{i}].duration"), "must be positive"));
            }
            if s.amplitudes.len() != self.colors.len() {
                return Err(invalid(
                    format!("schedule[{i}].amplitudes"),
                    format!("{} entries for {} colors", s.amplitudes.len(), self.colors.len()),
                ));
            }
            if s.amplitudes.iter().any(|a| !(a[0] >= 0.0 && a[0].is_finite() && a[1].is_finite())) {
                return Err(invalid(format!("schedule[{i}].amplitudes"), "amplitudes must be nonnegative and finite"));
            }
        }
        self.validate_task()
    }

    fn validate_task(&self) -> Result<(), ScenarioError> {
        let needs_colors = |what: &str| {
            if self.colors.is_empty() {
                Err(invalid("colors", format!("task {what} needs at least one color")))
            } else {
                Ok(())
            }
        };
        match &self.task {
            Task::Zeros { n, curve_min, curve_max, curve_points, .. } => {
                if *n == 0 {
                    return Err(invalid("task.n", "must be positive"));
                }
                if *curve_points < 2 || !(curve_max.unwrap_or(0.0) > *curve_min) {
                    return Err(invalid("task.curve_points", "need at least 2 points on a nonempty range"));
                }
            }
            Task::Matelem { etas, .. } => {
                if etas.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
                    return Err(invalid("task.etas", "must be nonnegative"));
                }
            }
            Task::Graph { threshold } => {
                if !(*threshold > 0.0) {
                    return Err(invalid("task.threshold", "must be positive"));
                }
                needs_colors("graph")?;
            }
            Task::Liealg { tol, .. } => {
                if !(*tol > 0.0) {
                    return Err(invalid("task.tol", "must be positive"));
                }
                needs_colors("liealg")?;
            }
            Task::Evolve { initial, oracle_dt, .. } => {
                self.state(initial, "task.initial")?;
                if *oracle_dt < 0.0 {
                    return Err(invalid("task.oracle_dt", "must be nonnegative"));
                }
                for (i, c) in self.colors.iter().enumerate() {
                    if c.detuning != 0.0 {
                        return Err(invalid(format!("colors[{i}].detuning"), "propagation is on resonance only"));
                    }
                }
            }
            Task::Laweberly { target, sideband, rabi } => {
                if self.model.ions != 1 {
                    return Err(invalid("model.ions", "laweberly needs one ion"));
                }
                if target.is_empty() {
                    return Err(invalid("task.target", "must list at least one amplitude"));
                }
                self.state(target, "task.target")?;
                match Sideband::from_str(sideband) {
                    Ok(Sideband::Red | Sideband::Blue) => {}
                    _ => return Err(invalid("task.sideband", "must be red or blue")),
                }
                if !(*rabi > 0.0) {
                    return Err(invalid("task.rabi", "must be positive"));
                }
            }
            Task::Optimize { .. } => {
                needs_colors("optimize")?;
                self.objective()?;
                self.search_config()?;
            }
        }
        Ok(())
    }

    pub fn system_model(&self) -> Result<SystemModel, ScenarioError> {
        let m = &self.model;
        let eta = m.lamb_dicke.resolve()?;
        let trap = TrapConfig {
            mode_freq: m.mode_freq,
            lamb_dicke: eta,
            participation: m.participation.clone(),
        };
        let ions = vec![IonConfig::new(m.qubit_splitting, m.addressable); m.ions];
        SystemModel::new(trap, ions, m.cutoff, m.ldl).map_err(|e| invalid("model", e))
    }

    pub fn field_colors(&self) -> Vec<FieldColor> {
        self.colors
            .iter()
            .map(|c| {
                let mut f = FieldColor::new(c.target_ion, c.sideband.parse().expect("validated"), c.rabi, c.phase);
                f.detuning = c.detuning;
                f
            })
            .collect()
    }

    pub fn pulse_schedule(&self) -> PulseSchedule {
        let colors = self.field_colors();
        PulseSchedule::new(
            self.schedule
                .iter()
                .map(|s| {
                    Segment::new(
                        colors.iter().zip(&s.amplitudes).map(|(c, a)| c.with_amplitude(a[0], a[1])).collect(),
                        s.duration,
                    )
                })
                .collect(),
        )
    }

    /// Full-space state from terms; empty means the ground state.
    pub fn state(&self, terms: &[StateTerm], field: &str) -> Result<StateVector, ScenarioError> {
        let model = self.system_model()?;
        if terms.is_empty() {
            let g = model.basis.ground_index();
            return Ok(StateVector::from_fn(model.dim(), |r, _| C64::new(if r == g { 1.0 } else { 0.0 }, 0.0)));
        }
        let mut v = StateVector::zeros(model.dim());
        for (i, t) in terms.iter().enumerate() {
            let f = format!("{field}[{i}]");
            let spins = parse_spins(&f, &t.spins, self.model.ions)?;
            let idx = model
                .basis
                .index(&BasisState::new(spins, t.n))
                .ok_or_else(|| invalid(&f, format!("n = {} outside the cutoff {}", t.n, self.model.cutoff)))?;
            v[idx] += C64::new(t.re, t.im);
        }
        normalize(field, v)
    }

    pub fn spin_state(&self, terms: &[SpinTerm], field: &str) -> Result<StateVector, ScenarioError> {
        let ions = self.model.ions;
        let mut v = StateVector::zeros(1 << ions);
        for (i, t) in terms.iter().enumerate() {
            let spins = parse_spins(&format!("{field}[{i}]"), &t.spins, ions)?;
            // spins-major with ion 0 most significant, Up = 0
            let idx = spins.iter().fold(0, |acc, s| 2 * acc + usize::from(*s == Spin::Down));
            v[idx] += C64::new(t.re, t.im);
        }
        normalize(field, v)
    }

    pub fn objective(&self) -> Result<ion_control::optimizer::Objective, ScenarioError> {
        use ion_control::optimizer::Objective;
        let Task::Optimize {
            objective,
            initial,
            target,
            target_spin,
            purity_floor,
            ..
        } = &self.task
        else {
            return Err(invalid("task.kind", "not an optimize task"));
        };
        let initial = self.state(initial, "task.initial")?;
        match objective.as_str() {
            "state" => {
                if target.is_empty() {
                    return Err(invalid("task.target", "state objective needs a target"));
                }
                Ok(Objective::StateFidelity {
                    initial,
                    target: self.state(target, "task.target")?,
                })
            }
            "spin" => {
                if target_spin.is_empty() {
                    return Err(invalid("task.target_spin", "spin objective needs a target"));
                }
                if !(0.0..=1.0).contains(purity_floor) {
                    return Err(invalid("task.purity_floor", "must lie in [0, 1]"));
                }
                Ok(Objective::SpinFidelity {
                    initial,
                    target_spin: self.spin_state(target_spin, "task.target_spin")?,
                    purity_floor: *purity_floor,
                })
            }
            other => Err(invalid("task.objective", format!("{other:?} is not state or spin"))),
        }
    }

    pub fn search_config(&self) -> Result<ion_control::optimizer::SearchConfig, ScenarioError> {
        let Task::Optimize {
            population,
            elite,
            initial_scale,
            decay,
            stagnation_limit,
            max_generations,
            target_score,
            rabi_max,
            t_max,
            segments,
            ..
        } = &self.task
        else {
            return Err(invalid("task.kind", "not an optimize task"));
        };
        let model = self.system_model()?;
        let base = ion_control::optimizer::SearchConfig::for_model(&model);
        let rabi_max = rabi_max.unwrap_or(base.rabi_max);
        let cfg = ion_control::optimizer::SearchConfig {
            population: *population,
            elite: *elite,
            initial_scale: *initial_scale,
            decay: *decay,
            stagnation_limit: *stagnation_limit,
            max_generations: *max_generations,
            target_score: *target_score,
            rabi_max,
            t_max: t_max.unwrap_or(400.0 / rabi_max),
            segments: *segments,
            ..base
        };
        if cfg.population < 2 || cfg.elite == 0 || cfg.elite >= cfg.population {
            return Err(invalid("task.elite", "need 0 < elite < population"));
        }
        if !(cfg.rabi_max > 0.0 && cfg.rabi_max.is_finite()) {
            return Err(invalid("task.rabi_max", "must be positive and finite"));
        }
        if !(cfg.t_max > 0.0 && cfg.t_max.is_finite()) {
            return Err(invalid("task.t_max", "must be positive and finite"));
        }
        if !(cfg.decay > 0.0 && cfg.decay <= 1.0) || !(cfg.initial_scale > 0.0) {
            return Err(invalid("task.decay", "mutation settings out of range"));
        }
        if !(1..=8).contains(&cfg.segments) {
            return Err(invalid("task.segments", "must be between 1 and 8"));
        }
        Ok(cfg)
    }
}
