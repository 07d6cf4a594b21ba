//! Scenario files: a strict JSON schema describing agents, hardware,
//! obstacles, formations, and scheduled orders, plus the validation and
//! seeded random placement that turn one into a runnable simulation.
//!
//! Parsing is unforgiving (unknown fields are rejected), validation reports
//! every problem with a JSON-style path, and placement draws from a
//! deterministic generator so the same file and seed always produce the
//! same world.

use crate::engine::{
    technology_defaults, Agent, AgentKind, CouplingMap, EngineError, RxCapability, ScheduledOrder,
    SimConfig, SimState, TxCapability,
};
use crate::formation::FormationSpec;
use crate::linkmodels::{
    CwptParams, Gain, IwptParams, LaserParams, LinkTechnologyParams, OwptLedParams, RfParams,
    TechnologyKind,
};
use crate::market::{Order, Side};
use crate::storage::{HybridStore, Reservoir};
use crate::world::{Obstacle, Pose, SafetyPolicy};
use crate::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Deserialize;
use std::collections::BTreeSet;

/// Scenario loading failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario is not valid JSON: {0}")]
    Parse(String),
    #[error("scenario failed validation:\n{0}")]
    Invalid(ValidationReport),
    #[error("could not place agent {agent}: no admissible position in {attempts} draws")]
    PlacementFailed { agent: String, attempts: u32 },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// How serious a validation finding is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    /// The scenario cannot run.
    Error,
    /// The scenario runs but a setting looks unintended.
    Warning,
}

/// A single validation finding, anchored to a JSON-style path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

/// All findings from one validation pass.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ValidationIssue {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        });
    }

    fn warning(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ValidationIssue {
            severity: Severity::Warning,
            path: path.into(),
            message: message.into(),
        });
    }

    pub fn has_errors(&self) -> bool {
        self.issues.iter().any(|i| i.severity == Severity::Error)
    }

    pub fn has_warnings(&self) -> bool {
        self.issues.iter().any(|i| i.severity == Severity::Warning)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for issue in &self.issues {
            let tag = match issue.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            writeln!(f, "{tag}: {}: {}", issue.path, issue.message)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Raw schema (exact file shape; unknown fields are rejected)
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    meta: RawMeta,
    #[serde(default)]
    config: RawConfig,
    #[serde(default)]
    obstacles: Vec<RawObstacle>,
    agents: Vec<RawAgent>,
    formation: Option<RawFormation>,
    #[serde(default)]
    orders: Vec<RawOrder>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeta {
    name: String,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    seed: u64,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    dt_s: Option<f64>,
    ticks: Option<u64>,
    market_interval: Option<u64>,
    max_slew_rate_rad_s: Option<f64>,
    safety: Option<RawSafety>,
    coupling: Option<RawCoupling>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSafety {
    base_distance_m: f64,
    time_headway_s: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoupling {
    k_ref: f64,
    d_ref_m: f64,
    exponent: f64,
    cutoff_m: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObstacle {
    center_m: [f64; 3],
    radius_m: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    id: String,
    kind: String,
    position: RawPlacement,
    #[serde(default)]
    velocity_m_s: Option<[f64; 3]>,
    #[serde(default)]
    boresight: Option<[f64; 3]>,
    #[serde(default)]
    max_speed_m_s: Option<f64>,
    #[serde(default)]
    motion_power_w: Option<f64>,
    storage: RawStorage,
    #[serde(default)]
    transmitter: Option<RawTransmitter>,
    #[serde(default)]
    receiver: Option<RawReceiver>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawPlacement {
    Fixed([f64; 3]),
    Random(RawRandomBox),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRandomBox {
    random_box: RawBox,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    min_m: [f64; 3],
    max_m: [f64; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStorage {
    battery: RawReservoir,
    supercap: RawReservoir,
    #[serde(default)]
    trickle_power_w: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReservoir {
    capacity_wh: f64,
    #[serde(default)]
    initial_soc_wh: Option<f64>,
    max_charge_w: f64,
    max_discharge_w: f64,
    #[serde(default)]
    in_efficiency: Option<f64>,
    #[serde(default)]
    out_efficiency: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransmitter {
    technology: RawTechnology,
    #[serde(default)]
    efficiency: Option<f64>,
    max_power_w: f64,
    #[serde(default)]
    max_range_m: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReceiver {
    technology: String,
    #[serde(default)]
    efficiency: Option<f64>,
}

#[derive(Deserialize)]
#[serde(tag = "type")]
enum RawTechnology {
    #[serde(rename = "owpt_led")]
    OwptLed(RawOwptLed),
    #[serde(rename = "laser")]
    Laser(RawLaser),
    #[serde(rename = "rf")]
    Rf(RawRf),
    #[serde(rename = "iwpt")]
    Iwpt(RawIwpt),
    #[serde(rename = "cwpt")]
    Cwpt(RawCwpt),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOwptLed {
    half_angle_rad: f64,
    receiver_area_m2: f64,
    fov_width_rad: f64,
    #[serde(default)]
    filter_gain: Option<f64>,
    #[serde(default)]
    concentrator_gain: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLaser {
    radiance_w_sr_m2: f64,
    source_area_m2: f64,
    absorption: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRf {
    receive_aperture_m2: f64,
    transmit_aperture_m2: f64,
    wavelength_m: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIwpt {
    l1_h: f64,
    l2_h: f64,
    lm_h: f64,
    r1_ohm: f64,
    r2_ohm: f64,
    r_load_ohm: f64,
    omega_rad_s: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCwpt {
    topology: String,
    coupling: f64,
    #[serde(default)]
    q: Option<f64>,
    #[serde(default)]
    q1: Option<f64>,
    #[serde(default)]
    q2: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFormation {
    members: Vec<String>,
    offsets_m: Vec<[f64; 3]>,
    edges: Vec<[usize; 2]>,
    #[serde(default)]
    gain_p: Option<f64>,
    #[serde(default)]
    gain_d: Option<f64>,
    #[serde(default)]
    max_accel_m_s2: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOrder {
    id: String,
    agent: String,
    side: String,
    quantity_wh: f64,
    limit_price: f64,
    submit_tick: u64,
    deadline_tick: u64,
    #[serde(default)]
    renewable: bool,
}

// ---------------------------------------------------------------------------
// Validated scenario
// ---------------------------------------------------------------------------

/// Where an agent starts.
#[derive(Debug, Clone, PartialEq)]
enum Placement {
    Fixed(Vec3),
    /// Uniform draw from an axis-aligned box, rejecting positions closer
    /// than the base safety distance to any already-placed agent.
    RandomBox { min: Vec3, max: Vec3 },
}

#[derive(Debug, Clone)]
struct AgentPlan {
    id: String,
    kind: AgentKind,
    placement: Placement,
    velocity: Vec3,
    boresight: Vec3,
    max_speed_m_s: f64,
    motion_power_w: f64,
    store: HybridStore<f64>,
    transmitter: Option<TxCapability>,
    receiver: Option<RxCapability>,
}

/// Maximum rejection-sampling draws per randomly placed agent.
const PLACEMENT_ATTEMPTS: u32 = 1000;

/// A parsed and validated scenario, ready to build simulations from.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: Option<String>,
    pub seed: u64,
    config: SimConfig,
    obstacles: Vec<Obstacle<f64>>,
    plans: Vec<AgentPlan>,
    formation: Option<FormationSpec<f64>>,
    orders: Vec<ScheduledOrder>,
}

impl Scenario {
    /// Parses and validates scenario JSON. On success the report may still
    /// carry warnings; any error-severity issue fails the parse.
    pub fn parse(text: &str) -> Result<(Scenario, ValidationReport), ScenarioError> {
        let raw: RawScenario = serde_json::from_str(text)
            .map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let mut report = ValidationReport::default();
        let scenario = validate(raw, &mut report);
        match scenario {
            Some(s) if !report.has_errors() => Ok((s, report)),
            _ => Err(ScenarioError::Invalid(report)),
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn agent_count(&self) -> usize {
        self.plans.len()
    }

    pub fn order_count(&self) -> usize {
        self.orders.len()
    }

    /// Builds a fresh simulation: places agents (seeded rejection sampling
    /// for random boxes), then assembles and re-validates the engine state.
    /// `seed_override` replaces the scenario seed for placement and for the
    /// run record.
    pub fn build(&self, seed_override: Option<u64>) -> Result<SimState, ScenarioError> {
        let seed = seed_override.unwrap_or(self.seed);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let min_separation = self.config.safety.safe_distance(0.0);
        let mut placed: Vec<Vec3> = Vec::new();
        let mut agents = Vec::with_capacity(self.plans.len());
        for plan in &self.plans {
            let position = match &plan.placement {
                Placement::Fixed(p) => *p,
                Placement::RandomBox { min, max } => {
                    let mut found = None;
                    for _ in 0..PLACEMENT_ATTEMPTS {
                        let candidate = Vec3::new(
                            rng.gen_range(min.x..=max.x),
                            rng.gen_range(min.y..=max.y),
                            rng.gen_range(min.z..=max.z),
                        );
                        if placed
                            .iter()
                            .all(|p| (p - candidate).norm() >= min_separation)
                        {
                            found = Some(candidate);
                            break;
                        }
                    }
                    found.ok_or_else(|| ScenarioError::PlacementFailed {
                        agent: plan.id.clone(),
                        attempts: PLACEMENT_ATTEMPTS,
                    })?
                }
            };
            placed.push(position);
            let pose = Pose::new(position, plan.velocity, plan.boresight)
                .map_err(EngineError::from)?;
            agents.push(Agent {
                id: plan.id.clone(),
                kind: plan.kind,
                pose,
                max_speed_m_s: plan.max_speed_m_s,
                motion_power_w: plan.motion_power_w,
                store: plan.store.clone(),
                transmitter: plan.transmitter.clone(),
                receiver: plan.receiver.clone(),
            });
        }
        let mut config = self.config.clone();
        config.seed = seed;
        let sim = SimState::new(
            config,
            agents,
            self.obstacles.clone(),
            self.formation.clone(),
            self.orders.clone(),
        )?;
        Ok(sim)
    }
}

fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn validate(raw: RawScenario, report: &mut ValidationReport) -> Option<Scenario> {
    if raw.meta.name.is_empty() {
        report.error("meta.name", "must not be empty");
    }

    // Global configuration with defaults.
    let defaults = SimConfig::default();
    let dt_s = raw.config.dt_s.unwrap_or(defaults.dt_s);
    if !(dt_s.is_finite() && dt_s > 0.0) {
        report.error("config.dt_s", "must be finite and positive");
    }
    let ticks = raw.config.ticks.unwrap_or(defaults.ticks);
    if ticks < 1 {
        report.error("config.ticks", "must be at least 1");
    }
    let market_interval = raw
        .config
        .market_interval
        .unwrap_or(defaults.market_interval);
    if market_interval < 1 {
        report.error("config.market_interval", "must be at least 1");
    }
    let max_slew = raw
        .config
        .max_slew_rate_rad_s
        .unwrap_or(defaults.max_slew_rate_rad_s);
    if !(max_slew.is_finite() && max_slew > 0.0) {
        report.error("config.max_slew_rate_rad_s", "must be finite and positive");
    }
    let safety = match &raw.config.safety {
        None => Some(SafetyPolicy::standard()),
        Some(s) => match SafetyPolicy::new(s.base_distance_m, s.time_headway_s) {
            Ok(policy) => Some(policy),
            Err(e) => {
                report.error("config.safety", e.to_string());
                None
            }
        },
    };
    let coupling = match &raw.config.coupling {
        None => CouplingMap::default(),
        Some(c) => {
            let map = CouplingMap {
                k_ref: c.k_ref,
                d_ref_m: c.d_ref_m,
                exponent: c.exponent,
                cutoff_m: c.cutoff_m,
            };
            if let Err(e) = map.validate() {
                report.error("config.coupling", e.to_string());
            }
            map
        }
    };

    let mut obstacles = Vec::new();
    for (i, raw_obstacle) in raw.obstacles.iter().enumerate() {
        match Obstacle::new(vec3(raw_obstacle.center_m), raw_obstacle.radius_m) {
            Ok(o) => obstacles.push(o),
            Err(e) => report.error(format!("obstacles[{i}]"), e.to_string()),
        }
    }

    // Agents.
    let mut ids = BTreeSet::new();
    let mut plans = Vec::new();
    for (i, agent) in raw.agents.iter().enumerate() {
        let path = |field: &str| format!("agents[{i}].{field}");
        if agent.id.is_empty() {
            report.error(path("id"), "must not be empty");
        } else if !ids.insert(agent.id.clone()) {
            report.error(path("id"), format!("duplicate agent id {}", agent.id));
        }
        let kind = match agent.kind.as_str() {
            "static" => AgentKind::Static,
            "mobile" => AgentKind::Mobile,
            other => {
                report.error(path("kind"), format!("unknown kind {other:?} (expected \"static\" or \"mobile\")"));
                AgentKind::Static
            }
        };
        let velocity = vec3(agent.velocity_m_s.unwrap_or([0.0; 3]));
        if kind == AgentKind::Static && velocity != Vec3::zeros() {
            report.error(path("velocity_m_s"), "static agents must start at rest");
        }
        let boresight = vec3(agent.boresight.unwrap_or([1.0, 0.0, 0.0]));
        // Probe pose validity (unit boresight, finite components) here so
        // the issue carries a path; placement re-checks at build time.
        let probe_position = match &agent.position {
            RawPlacement::Fixed(p) => vec3(*p),
            RawPlacement::Random(r) => vec3(r.random_box.min_m),
        };
        if let Err(e) = Pose::new(probe_position, velocity, boresight) {
            report.error(path("boresight"), e.to_string());
        }
        let placement = match &agent.position {
            RawPlacement::Fixed(p) => Placement::Fixed(vec3(*p)),
            RawPlacement::Random(r) => {
                let min = vec3(r.random_box.min_m);
                let max = vec3(r.random_box.max_m);
                if !(min.x <= max.x && min.y <= max.y && min.z <= max.z) {
                    report.error(
                        path("position.random_box"),
                        "min_m must not exceed max_m on any axis",
                    );
                }
                Placement::RandomBox { min, max }
            }
        };
        let max_speed = agent.max_speed_m_s.unwrap_or(0.0);
        if kind == AgentKind::Static && max_speed > 0.0 {
            report.warning(
                path("max_speed_m_s"),
                "ignored for static agents",
            );
        }
        let motion_power = agent.motion_power_w.unwrap_or(0.0);

        let build_reservoir = |raw: &RawReservoir, field: &str| {
            Reservoir::new(
                raw.capacity_wh,
                raw.initial_soc_wh.unwrap_or(0.0),
                raw.max_charge_w,
                raw.max_discharge_w,
                raw.in_efficiency.unwrap_or(1.0),
                raw.out_efficiency.unwrap_or(1.0),
            )
            .map_err(|e| (path(field), e.to_string()))
        };
        let store = build_reservoir(&agent.storage.battery, "storage.battery")
            .and_then(|battery| {
                build_reservoir(&agent.storage.supercap, "storage.supercap")
                    .map(|supercap| (battery, supercap))
            })
            .and_then(|(battery, supercap)| {
                HybridStore::new(
                    battery,
                    supercap,
                    agent.storage.trickle_power_w.unwrap_or(0.0),
                )
                .map_err(|e| (path("storage"), e.to_string()))
            });
        let store = match store {
            Ok(s) => Some(s),
            Err((p, m)) => {
                report.error(p, m);
                None
            }
        };

        let transmitter = match &agent.transmitter {
            None => None,
            Some(raw_tx) => match build_technology(&raw_tx.technology) {
                Err(message) => {
                    report.error(path("transmitter.technology"), message);
                    None
                }
                Ok(technology) => {
                    let (default_tx_eff, _, default_range) =
                        technology_defaults(technology.kind());
                    let capability = TxCapability {
                        efficiency: raw_tx.efficiency.unwrap_or(default_tx_eff),
                        max_power_w: raw_tx.max_power_w,
                        max_range_m: raw_tx.max_range_m.unwrap_or(default_range),
                        technology,
                    };
                    if capability.technology.kind().is_near_field()
                        && capability.max_range_m > coupling.cutoff_m
                    {
                        report.warning(
                            path("transmitter.max_range_m"),
                            format!(
                                "exceeds the coupling cutoff of {} m; the link cannot \
                                 transfer beyond the cutoff",
                                coupling.cutoff_m
                            ),
                        );
                    }
                    Some(capability)
                }
            },
        };
        let receiver = match &agent.receiver {
            None => None,
            Some(raw_rx) => match raw_rx.technology.parse::<TechnologyKind>() {
                Err(e) => {
                    report.error(path("receiver.technology"), e.to_string());
                    None
                }
                Ok(kind) => {
                    let (_, default_rx_eff, _) = technology_defaults(kind);
                    Some(RxCapability {
                        technology: kind,
                        efficiency: raw_rx.efficiency.unwrap_or(default_rx_eff),
                    })
                }
            },
        };

        if let Some(store) = store {
            plans.push(AgentPlan {
                id: agent.id.clone(),
                kind,
                placement,
                velocity,
                boresight,
                max_speed_m_s: max_speed,
                motion_power_w: motion_power,
                store,
                transmitter,
                receiver,
            });
        }
    }

    // Formation.
    let formation = match &raw.formation {
        None => None,
        Some(raw_formation) => {
            for (j, member) in raw_formation.members.iter().enumerate() {
                match raw.agents.iter().find(|a| &a.id == member) {
                    None => report.error(
                        format!("formation.members[{j}]"),
                        format!("unknown agent {member}"),
                    ),
                    Some(agent) if agent.kind != "mobile" => report.error(
                        format!("formation.members[{j}]"),
                        format!("agent {member} must be mobile"),
                    ),
                    Some(_) => {}
                }
            }
            match FormationSpec::new(
                raw_formation.members.clone(),
                raw_formation.offsets_m.iter().map(|&o| vec3(o)).collect(),
                raw_formation.edges.iter().map(|&[a, b]| (a, b)).collect(),
                raw_formation.gain_p.unwrap_or(1.0),
                raw_formation.gain_d.unwrap_or(2.0),
                raw_formation.max_accel_m_s2.unwrap_or(5.0),
            ) {
                Ok(spec) => Some(spec),
                Err(e) => {
                    report.error("formation", e.to_string());
                    None
                }
            }
        }
    };

    // Orders.
    let mut order_ids = BTreeSet::new();
    let mut orders = Vec::new();
    for (i, raw_order) in raw.orders.iter().enumerate() {
        let path = |field: &str| format!("orders[{i}].{field}");
        if !order_ids.insert(raw_order.id.clone()) {
            report.error(path("id"), format!("duplicate order id {}", raw_order.id));
        }
        if !ids.contains(&raw_order.agent) {
            report.error(path("agent"), format!("unknown agent {}", raw_order.agent));
        }
        let side = match raw_order.side.as_str() {
            "bid" => Some(Side::Bid),
            "offer" => Some(Side::Offer),
            other => {
                report.error(
                    path("side"),
                    format!("unknown side {other:?} (expected \"bid\" or \"offer\")"),
                );
                None
            }
        };
        if raw_order.submit_tick < 1 || raw_order.submit_tick > ticks {
            report.error(
                path("submit_tick"),
                format!("must lie in [1, {ticks}] (the run's tick range)"),
            );
        }
        if raw_order.deadline_tick > ticks {
            report.warning(
                path("deadline_tick"),
                format!("beyond the final tick {ticks}; the order outlives the run"),
            );
        }
        let Some(side) = side else { continue };
        match Order::new(
            raw_order.id.clone(),
            raw_order.agent.clone(),
            side,
            raw_order.quantity_wh,
            raw_order.limit_price,
            raw_order.deadline_tick,
            raw_order.renewable,
            raw_order.submit_tick,
        ) {
            Ok(order) => orders.push(ScheduledOrder {
                submit_tick: raw_order.submit_tick,
                order,
            }),
            Err(e) => report.error(format!("orders[{i}]"), e.to_string()),
        }
    }

    let safety = safety?;
    Some(Scenario {
        name: raw.meta.name,
        description: raw.meta.description,
        seed: raw.meta.seed,
        config: SimConfig {
            dt_s,
            ticks,
            market_interval,
            max_slew_rate_rad_s: max_slew,
            safety,
            coupling,
            seed: raw.meta.seed,
        },
        obstacles,
        plans,
        formation,
        orders,
    })
}

/// Parses a standalone technology description (the same JSON object a
/// scenario's `transmitter.technology` field holds) into validated link
/// parameters. Used by command-line tools that evaluate links without a
/// full scenario.
pub fn technology_from_json(text: &str) -> Result<LinkTechnologyParams<f64>, String> {
    let raw: RawTechnology = serde_json::from_str(text).map_err(|e| e.to_string())?;
    build_technology(&raw)
}

fn build_technology(raw: &RawTechnology) -> Result<LinkTechnologyParams<f64>, String> {
    match raw {
        RawTechnology::OwptLed(p) => OwptLedParams::new(
            p.half_angle_rad,
            p.receiver_area_m2,
            p.fov_width_rad,
            Gain::Constant(p.filter_gain.unwrap_or(1.0)),
            Gain::Constant(p.concentrator_gain.unwrap_or(1.0)),
        )
        .map(LinkTechnologyParams::OwptLed)
        .map_err(|e| e.to_string()),
        RawTechnology::Laser(p) => {
            LaserParams::new(p.radiance_w_sr_m2, p.source_area_m2, p.absorption)
                .map(LinkTechnologyParams::Laser)
                .map_err(|e| e.to_string())
        }
        RawTechnology::Rf(p) => RfParams::new(
            p.receive_aperture_m2,
            p.transmit_aperture_m2,
            p.wavelength_m,
        )
        .map(LinkTechnologyParams::Rf)
        .map_err(|e| e.to_string()),
        RawTechnology::Iwpt(p) => IwptParams::new(
            p.l1_h,
            p.l2_h,
            p.lm_h,
            p.r1_ohm,
            p.r2_ohm,
            p.r_load_ohm,
            p.omega_rad_s,
        )
        .map(LinkTechnologyParams::Iwpt)
        .map_err(|e| e.to_string()),
        RawTechnology::Cwpt(p) => {
            let params = match p.topology.as_str() {
                "parallel" => match p.q {
                    Some(q) => CwptParams::parallel(p.coupling, q).map_err(|e| e.to_string()),
                    None => Err("parallel topology requires field q".to_string()),
                },
                "series" => match (p.q1, p.q2) {
                    (Some(q1), Some(q2)) => {
                        CwptParams::series(p.coupling, q1, q2).map_err(|e| e.to_string())
                    }
                    _ => Err("series topology requires fields q1 and q2".to_string()),
                },
                other => Err(format!(
                    "unknown topology {other:?} (expected \"parallel\" or \"series\")"
                )),
            }?;
            Ok(LinkTechnologyParams::Cwpt(params))
        }
    }
}
