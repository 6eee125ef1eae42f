//! Discrete-time simulator of the feedwater-tank level loop of a water
//! process system: forward-Euler tank dynamics, a hysteresis inflow
//! controller, an LL safety interlock that latches a deadlock, and low/high
//! alarms. The `Plant` variant adds a deterministic sinusoidal ripple to the
//! `Model` variant.
//!
//! Levels are percent of tank span, flows are percent per second.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::{Trace, TraceError};
use crate::expr::Atom;
use crate::ontology::{Ontology, OntologyError};

pub const SYSTEM: &str = "System";
pub const TANK: &str = "Feedwater Tank";
pub const ALARM: &str = "FeedWater Alarm";
pub const NORMAL_OPERATION: &str = "normal system operation";
pub const UNDERFLOWS: &str = "underflows";
pub const OVERFLOWS: &str = "overflows";
pub const RAISED: &str = "raised";
pub const LEVEL_LOW: &str = "level low";
pub const LEVEL_HIGH: &str = "level high";

/// The minimal requirements ontology: `System` contains the tank and the
/// alarm, and each concept carries the states the safety requirements talk
/// about.
pub fn minimal_ontology() -> Ontology {
    let mut o = Ontology::new(1);
    o.add_concept(SYSTEM)
        .add_concept(TANK)
        .add_concept(ALARM)
        .contains(SYSTEM, TANK)
        .contains(SYSTEM, ALARM)
        .attach_state(SYSTEM, NORMAL_OPERATION)
        .attach_state(TANK, UNDERFLOWS)
        .attach_state(TANK, OVERFLOWS)
        .attach_state(ALARM, RAISED);
    o
}

/// [`minimal_ontology`] plus the staged level bands used by multi-step
/// requirements.
pub fn wps_ontology() -> Ontology {
    let mut o = minimal_ontology();
    o.attach_state(TANK, LEVEL_LOW)
        .attach_state(TANK, LEVEL_HIGH);
    o
}

/// Stage-2 design extension: the system split into plant, controller and
/// view, with the components that realize the tank, its level control and
/// the alarm. Link it to [`wps_ontology`] with [`design_links`].
pub fn design_ontology() -> Ontology {
    let mut o = Ontology::new(1);
    o.add_concept("Plant")
        .add_concept("Controller")
        .add_concept("View")
        .add_concept("Level Sensor")
        .add_concept("Inflow Valve")
        .add_concept("Level Controller")
        .add_concept("Alarm Panel")
        .contains("Plant", "Level Sensor")
        .contains("Plant", "Inflow Valve")
        .contains("Controller", "Level Controller")
        .contains("View", "Alarm Panel")
        .attach_state("Level Sensor", "faulted")
        .attach_state("Inflow Valve", "open")
        .attach_state("Level Controller", "interlocked")
        .attach_state("Alarm Panel", "lit");
    o
}

pub fn design_links() -> Vec<crate::ontology::RefinementLink> {
    [
        ("Plant", SYSTEM),
        ("Level Sensor", TANK),
        ("Alarm Panel", ALARM),
    ]
    .into_iter()
    .map(|(refined, base)| crate::ontology::RefinementLink {
        refined: refined.into(),
        base: base.into(),
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantParams {
    pub ll: f64,
    pub l: f64,
    pub h: f64,
    pub hh: f64,
    /// Step size, seconds.
    pub dt: f64,
    pub q_in_max: f64,
    pub q_out_max: f64,
    pub initial_level: f64,
    pub horizon: usize,
    /// Per-step ripple amplitude of the plant variant.
    pub ripple_amp: f64,
    pub ripple_freq: f64,
    /// Amplitude of seeded uniform noise added per step (plant variant only).
    pub noise_amp: f64,
    pub seed: u64,
}

impl Default for PlantParams {
    fn default() -> Self {
        PlantParams {
            ll: 10.0,
            l: 20.0,
            h: 80.0,
            hh: 90.0,
            dt: 0.1,
            q_in_max: 5.0,
            q_out_max: 4.0,
            initial_level: 50.0,
            horizon: 2000,
            ripple_amp: 2.0,
            ripple_freq: 1.0,
            noise_amp: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid plant parameters: {0}")]
    Params(String),
    #[error("invalid plant state: {0}")]
    State(String),
    #[error("scenario event {index} at t={t} is earlier than the event before it")]
    UnorderedScript { index: usize, t: f64 },
    #[error("scenario event {index}: {message}")]
    BadEvent { index: usize, message: String },
    #[error("binding: {0}")]
    Binding(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Params(m.to_string()));
        let finite = [
            self.ll,
            self.l,
            self.h,
            self.hh,
            self.dt,
            self.q_in_max,
            self.q_out_max,
            self.initial_level,
            self.ripple_amp,
            self.ripple_freq,
            self.noise_amp,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return bad("all parameters must be finite");
        }
        if !(0.0 <= self.ll
            && self.ll < self.l
            && self.l < self.h
            && self.h < self.hh
            && self.hh <= 100.0)
        {
            return bad("thresholds must satisfy 0 <= LL < L < H < HH <= 100");
        }
        if self.dt <= 0.0 {
            return bad("dt must be positive");
        }
        if self.q_in_max < 0.0 || self.q_out_max < 0.0 {
            return bad("flow rates must be non-negative");
        }
        if self.ripple_amp < 0.0 || self.noise_amp < 0.0 {
            return bad("ripple and noise amplitudes must be non-negative");
        }
        if !(0.0..=100.0).contains(&self.initial_level) {
            return bad("initial level must lie in [0, 100]");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let p: PlantParams =
            serde_json::from_str(text).map_err(|e| SimError::Params(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Model,
    Plant,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Model => "model",
            Variant::Plant => "plant",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub time: f64,
    pub level: f64,
    pub inflow_valve: f64,
    pub outflow_demand: f64,
    pub low_alarm: bool,
    pub high_alarm: bool,
    pub deadlocked: bool,
    /// Scenario flag: the operator considers the system in normal operation.
    pub normal_operation: bool,
}

impl PlantState {
    /// Initial state with the controller and alarms settled on the initial
    /// level.
    pub fn initial(p: &PlantParams) -> Self {
        let mut s = PlantState {
            time: 0.0,
            level: p.initial_level,
            inflow_valve: 0.0,
            outflow_demand: 0.0,
            low_alarm: false,
            high_alarm: false,
            deadlocked: false,
            normal_operation: true,
        };
        s.settle(p);
        s
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let frac = 0.0..=1.0;
        if !(0.0..=100.0).contains(&self.level) {
            return Err(SimError::State(format!(
                "level {} outside [0, 100]",
                self.level
            )));
        }
        if !frac.contains(&self.inflow_valve) || !frac.contains(&self.outflow_demand) {
            return Err(SimError::State("valve positions must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Applies the controller, alarms and interlock to the current level.
    fn settle(&mut self, p: &PlantParams) {
        if self.level <= p.l {
            self.inflow_valve = 1.0;
        } else if self.level >= p.h {
            self.inflow_valve = 0.0;
        }
        self.low_alarm = self.level < p.l;
        self.high_alarm = self.level > p.h;
        if self.level <= p.ll {
            self.deadlocked = true;
        }
        if self.deadlocked {
            self.outflow_demand = 0.0;
        }
    }
}

/// Per-step disturbance source for the plant variant.
#[derive(Debug, Clone)]
pub struct Disturbance {
    rng: ChaCha8Rng,
}

impl Disturbance {
    pub fn new(seed: u64) -> Self {
        Disturbance {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn sample(&mut self, p: &PlantParams, t: f64, variant: Variant) -> f64 {
        match variant {
            Variant::Model => 0.0,
            Variant::Plant => {
                let ripple = p.ripple_amp * (2.0 * PI * p.ripple_freq * t).sin();
                let noise = if p.noise_amp > 0.0 {
                    self.rng.gen_range(-p.noise_amp..=p.noise_amp)
                } else {
                    0.0
                };
                ripple + noise
            }
        }
    }
}

/// One forward-Euler step. The interlock is checked on the level entering
/// the step (so a tank already at or below LL never drains further) and
/// again on the resulting level.
pub fn step(
    s: &PlantState,
    p: &PlantParams,
    disturbance: &mut Disturbance,
    variant: Variant,
) -> Result<PlantState, SimError> {
    p.validate()?;
    s.validate()?;
    let mut next = s.clone();
    if next.level <= p.ll {
        next.deadlocked = true;
    }
    if next.deadlocked {
        next.outflow_demand = 0.0;
    }
    let net = p.q_in_max * next.inflow_valve - p.q_out_max * next.outflow_demand;
    let d = disturbance.sample(p, s.time, variant);
    next.level = (next.level + net * p.dt + d).clamp(0.0, 100.0);
    next.time = s.time + p.dt;
    next.settle(p);
    Ok(next)
}

/// Assignments a scenario event may make.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assignments {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal_op: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEvent {
    pub t: f64,
    pub set: Assignments,
}

pub type Script = Vec<ScenarioEvent>;

pub fn load_script(text: &str) -> Result<Script, SimError> {
    let script: Script = serde_json::from_str(text).map_err(|e| SimError::BadEvent {
        index: 0,
        message: e.to_string(),
    })?;
    check_script(&script)?;
    Ok(script)
}

fn check_script(script: &Script) -> Result<(), SimError> {
    let mut prev = f64::NEG_INFINITY;
    for (index, ev) in script.iter().enumerate() {
        if !ev.t.is_finite() || ev.t < 0.0 {
            return Err(SimError::BadEvent {
                index,
                message: format!("time {} must be finite and non-negative", ev.t),
            });
        }
        if ev.t < prev {
            return Err(SimError::UnorderedScript { index, t: ev.t });
        }
        prev = ev.t;
        if let Some(d) = ev.set.demand {
            if !(0.0..=1.0).contains(&d) {
                return Err(SimError::BadEvent {
                    index,
                    message: format!("demand {d} outside [0, 1]"),
                });
            }
        }
        if let Some(l) = ev.set.level {
            if !(0.0..=100.0).contains(&l) {
                return Err(SimError::BadEvent {
                    index,
                    message: format!("level {l} outside [0, 100]"),
                });
            }
        }
    }
    Ok(())
}

type Predicate = Arc<dyn Fn(&PlantState, &PlantParams) -> bool + Send + Sync>;

/// Maps ontology atoms to predicates over the simulated state.
#[derive(Clone, Default)]
pub struct AtomBinding {
    entries: BTreeMap<Atom, Predicate>,
}

impl fmt::Debug for AtomBinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.entries.keys()).finish()
    }
}

impl AtomBinding {
    pub fn new() -> Self {
        Self::default()
    }

    /// Binds `atom`, which must be one of `o`'s induced atoms.
    pub fn bind<F>(&mut self, o: &Ontology, atom: Atom, pred: F) -> Result<&mut Self, SimError>
    where
        F: Fn(&PlantState, &PlantParams) -> bool + Send + Sync + 'static,
    {
        let atoms = o
            .induced_atoms()
            .map_err(|e: OntologyError| SimError::Binding(e.to_string()))?;
        if !atoms.contains(&atom) {
            return Err(SimError::Binding(format!(
                "atom {atom} is not in the ontology"
            )));
        }
        self.entries.insert(atom, Arc::new(pred));
        Ok(self)
    }

    pub fn atoms(&self) -> Vec<Atom> {
        self.entries.keys().cloned().collect()
    }

    pub fn evaluate(&self, s: &PlantState, p: &PlantParams) -> Vec<bool> {
        self.entries.values().map(|f| f(s, p)).collect()
    }
}

fn atom(c: &str, s: &str) -> Atom {
    Atom::new(c, s).expect("constant atom names are valid")
}

/// Binding for the tank ontology. The four core atoms must exist; the
/// `level low` / `level high` bands are bound when the ontology has them.
pub fn default_binding(o: &Ontology) -> Result<AtomBinding, SimError> {
    let mut b = AtomBinding::new();
    b.bind(o, atom(TANK, UNDERFLOWS), |s, p| s.level < p.ll)?;
    b.bind(o, atom(TANK, OVERFLOWS), |s, p| s.level > p.hh)?;
    b.bind(o, atom(ALARM, RAISED), |s, _| s.low_alarm || s.high_alarm)?;
    b.bind(o, atom(SYSTEM, NORMAL_OPERATION), |s, _| {
        s.normal_operation && !s.deadlocked
    })?;
    let atoms = o
        .induced_atoms()
        .map_err(|e| SimError::Binding(e.to_string()))?;
    if atoms.contains(&atom(TANK, LEVEL_LOW)) {
        b.bind(o, atom(TANK, LEVEL_LOW), |s, p| {
            p.ll <= s.level && s.level < p.l
        })?;
    }
    if atoms.contains(&atom(TANK, LEVEL_HIGH)) {
        b.bind(o, atom(TANK, LEVEL_HIGH), |s, p| {
            p.h < s.level && s.level <= p.hh
        })?;
    }
    Ok(b)
}

pub const ANALOGS: [&str; 3] = ["level", "inflowValve", "outflowDemand"];

/// Sample times on a fixed grid, rounded to 1 ns so they print cleanly.
fn grid_time(k: usize, dt: f64) -> f64 {
    (k as f64 * dt * 1e9).round() / 1e9
}

/// Runs `horizon` steps, sampling the initial state and every step, and
/// applying each script event at the first sample whose time reaches it.
pub fn run_scenario(
    p: &PlantParams,
    script: &Script,
    binding: &AtomBinding,
    variant: Variant,
) -> Result<Trace, SimError> {
    p.validate()?;
    check_script(script)?;
    let mut trace = Trace::new(
        binding.atoms(),
        ANALOGS.iter().map(|s| s.to_string()).collect(),
    )?;
    let mut disturbance = Disturbance::new(p.seed);
    let mut state = PlantState::initial(p);
    let mut pending = script.iter().peekable();
    for k in 0..=p.horizon {
        state.time = grid_time(k, p.dt);
        let mut changed = false;
        while let Some(ev) = pending.next_if(|ev| ev.t <= state.time + p.dt * 1e-6) {
            if let Some(d) = ev.set.demand {
                state.outflow_demand = d;
            }
            if let Some(l) = ev.set.level {
                state.level = l;
            }
            if let Some(n) = ev.set.normal_op {
                state.normal_operation = n;
            }
            changed = true;
        }
        if changed {
            state.settle(p);
        }
        trace.push(
            state.time,
            binding.evaluate(&state, p),
            vec![state.level, state.inflow_valve, state.outflow_demand],
        )?;
        if k < p.horizon {
            state = step(&state, p, &mut disturbance, variant)?;
        }
    }
    Ok(trace)
}
