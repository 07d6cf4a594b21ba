//! Fixed-timestep simulation engine.
//!
//! Each tick advances the world through the same phase sequence —
//! formation control, motion integration and beam pointing, market
//! bookkeeping, transfer-session supervision, energy transfer, motion
//! consumption, metrics — so that a run is a pure function of its inputs.
//! All iteration orders are fixed (agent declaration order, contract
//! creation order) and all state lives in ordered containers, which makes
//! rerunning a scenario reproduce every artifact byte for byte.

use crate::formation::{formation_control, formation_error, FormationError, FormationSpec};
use crate::linkmodels::{
    end_to_end_efficiency, link_env_efficiency_with_coupling, EfficiencyChain, LinkModelError,
    LinkTechnologyParams, TechnologyKind,
};
use crate::market::{ContractStatus, Market, MarketError, Order, Side};
use crate::storage::HybridStore;
use crate::world::{
    integrate_motion, link_geometry, track_target, Obstacle, Pose, SafetyPolicy, WorldError,
};
use crate::Vec3;
use std::collections::BTreeMap;

/// Simulation construction or stepping failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("agent id must not be empty")]
    EmptyAgentId,
    #[error("agent {0} declared more than once")]
    DuplicateAgentId(String),
    #[error("agent {id}: {reason}")]
    InvalidAgent { id: String, reason: String },
    #[error("unknown agent {0}")]
    UnknownAgent(String),
    #[error("configuration field {name} invalid: {reason}")]
    InvalidConfig {
        name: &'static str,
        reason: &'static str,
    },
    #[error("formation member {0} must be a mobile agent")]
    FormationMemberNotMobile(String),
    #[error("scheduled order {id}: submission tick {tick} is beyond the run")]
    OrderBeyondRun { id: String, tick: u64 },
    #[error("simulation already ran its configured tick count")]
    RunComplete,
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Formation(#[from] FormationError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Link(#[from] LinkModelError),
}

/// Whether an agent can reposition itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    /// Fixed installation; never moves.
    Static,
    /// Self-propelled; integrates accelerations and consumes energy while
    /// moving.
    Mobile,
}

/// Power-transmitting front end carried by an agent.
#[derive(Debug, Clone, PartialEq)]
pub struct TxCapability {
    /// Physical link model used to compute channel efficiency.
    pub technology: LinkTechnologyParams<f64>,
    /// Electrical-to-emission conversion efficiency, dimensionless [0, 1].
    pub efficiency: f64,
    /// Hard ceiling on transmit power, W.
    pub max_power_w: f64,
    /// Maximum link distance this transmitter will serve, m.
    pub max_range_m: f64,
}

/// Power-receiving front end carried by an agent.
#[derive(Debug, Clone, PartialEq)]
pub struct RxCapability {
    /// Technology the receiver hardware accepts.
    pub technology: TechnologyKind,
    /// Capture-to-electrical conversion efficiency, dimensionless [0, 1].
    pub efficiency: f64,
}

/// One participant: pose, storage, optional transmit/receive hardware.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: String,
    pub kind: AgentKind,
    pub pose: Pose<f64>,
    /// Speed ceiling, m/s (0 for static agents).
    pub max_speed_m_s: f64,
    /// Electrical draw while the agent is in motion, W.
    pub motion_power_w: f64,
    pub store: HybridStore<f64>,
    pub transmitter: Option<TxCapability>,
    pub receiver: Option<RxCapability>,
}

/// Distance-dependent magnetic/capacitive coupling: `k(d) = k_ref *
/// (d_ref / d)^exponent`, clamped to `k_ref` up close and zero beyond the
/// cutoff. Supplies the coupling coefficient for near-field links whose
/// geometry the simulation controls.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMap {
    pub k_ref: f64,
    pub d_ref_m: f64,
    pub exponent: f64,
    pub cutoff_m: f64,
}

impl Default for CouplingMap {
    fn default() -> Self {
        CouplingMap {
            k_ref: 0.3,
            d_ref_m: 0.1,
            exponent: 3.0,
            cutoff_m: 5.0,
        }
    }
}

impl CouplingMap {
    pub fn validate(&self) -> Result<(), EngineError> {
        let check = |name: &'static str, ok: bool, reason: &'static str| {
            if ok {
                Ok(())
            } else {
                Err(EngineError::InvalidConfig { name, reason })
            }
        };
        check(
            "coupling.k_ref",
            self.k_ref.is_finite() && self.k_ref > 0.0 && self.k_ref <= 1.0,
            "must lie in (0, 1]",
        )?;
        check(
            "coupling.d_ref_m",
            self.d_ref_m.is_finite() && self.d_ref_m > 0.0,
            "must be finite and positive",
        )?;
        check(
            "coupling.exponent",
            self.exponent.is_finite() && self.exponent >= 0.0,
            "must be finite and non-negative",
        )?;
        check(
            "coupling.cutoff_m",
            self.cutoff_m.is_finite() && self.cutoff_m > 0.0,
            "must be finite and positive",
        )
    }

    /// Coupling coefficient at separation `distance_m`.
    pub fn coupling_at(&self, distance_m: f64) -> f64 {
        if distance_m > self.cutoff_m {
            return 0.0;
        }
        if distance_m <= self.d_ref_m {
            return self.k_ref;
        }
        self.k_ref * (self.d_ref_m / distance_m).powf(self.exponent)
    }
}

/// Global run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Timestep, s.
    pub dt_s: f64,
    /// Number of ticks to run.
    pub ticks: u64,
    /// Clearing cadence: the market clears on ticks 1, 1+K, 1+2K, ...
    pub market_interval: u64,
    /// Beam-pointing slew-rate limit, rad/s.
    pub max_slew_rate_rad_s: f64,
    pub safety: SafetyPolicy<f64>,
    pub coupling: CouplingMap,
    /// Seed recorded in the run summary (placement happens upstream).
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt_s: 0.1,
            ticks: 100,
            market_interval: 10,
            max_slew_rate_rad_s: 1.0,
            safety: SafetyPolicy::standard(),
            coupling: CouplingMap::default(),
            seed: 0,
        }
    }
}

/// Whether a transfer session is currently able to move energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    Active,
    /// Out of range, blocked, uncoupled, or violating the safety margin.
    Suspended,
}

/// A live energy-transfer engagement backing an open contract.
#[derive(Debug, Clone, PartialEq)]
pub struct WptSession {
    pub contract_id: String,
    /// Transmitting agent (declaration index).
    pub tx: usize,
    /// Receiving agent (declaration index).
    pub rx: usize,
    pub state: SessionState,
}

/// Category of recorded fault.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultKind {
    /// Two contracted mobile agents came closer than the safety margin.
    SafetyViolation,
    /// An agent could not power its own motion.
    EnergyShortfall,
}

impl FaultKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FaultKind::SafetyViolation => "safety_violation",
            FaultKind::EnergyShortfall => "energy_shortfall",
        }
    }
}

/// One recorded fault occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultEvent {
    pub tick: u64,
    pub kind: FaultKind,
    /// Contract id for safety violations, agent id for shortfalls.
    pub subject: String,
    pub detail: String,
}

/// Aggregate per-tick measurements (one metrics row).
#[derive(Debug, Clone, PartialEq)]
pub struct TickMetrics {
    pub tick: u64,
    pub time_s: f64,
    /// Sum of battery state of charge over all agents, Wh.
    pub soc_battery_wh: f64,
    /// Sum of supercapacitor state of charge over all agents, Wh.
    pub soc_supercap_wh: f64,
    /// Energy credited to contracts this tick, Wh.
    pub delivered_wh: f64,
    /// Conversion and propagation losses this tick, Wh.
    pub losses_wh: f64,
    /// Faults recorded this tick.
    pub faults: u64,
}

/// An order the scenario injects at a fixed tick.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledOrder {
    pub submit_tick: u64,
    pub order: Order,
}

/// Deterministic text artifacts of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    /// Per-tick aggregate rows, `metrics.csv`.
    pub metrics_csv: String,
    /// Hash-chained market events, `ledger.jsonl`.
    pub ledger_jsonl: String,
    /// Run totals, agents, contracts, faults, `summary.json`.
    pub summary_json: String,
}

fn per_bid_demand(order: &Order) -> DemandRecord {
    DemandRecord {
        quantity_wh: order.quantity_wh,
        deadline: order.deadline,
        fulfilled_by_deadline_wh: 0.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
struct DemandRecord {
    quantity_wh: f64,
    deadline: u64,
    fulfilled_by_deadline_wh: f64,
}

/// Complete simulation state; stepping it mutates everything in place.
#[derive(Debug, Clone)]
pub struct SimState {
    config: SimConfig,
    agents: Vec<Agent>,
    index_by_id: BTreeMap<String, usize>,
    obstacles: Vec<Obstacle<f64>>,
    formation: Option<FormationSpec<f64>>,
    scheduled_orders: Vec<ScheduledOrder>,
    market: Market,
    /// Sessions keyed by contract id, in contract creation order.
    sessions: Vec<WptSession>,
    tick: u64,
    metrics: Vec<TickMetrics>,
    faults: Vec<FaultEvent>,
    /// Tick at which each contract was fulfilled.
    fulfillment_ticks: BTreeMap<String, u64>,
    demand: BTreeMap<String, DemandRecord>,
    initial_soc_wh: f64,
    total_delivered_wh: f64,
    total_losses_wh: f64,
    total_rejected_wh: f64,
    total_motion_wh: f64,
}

impl SimState {
    /// Validates the configuration, agents, formation, and scheduled orders
    /// and assembles a runnable simulation at tick 0.
    pub fn new(
        config: SimConfig,
        agents: Vec<Agent>,
        obstacles: Vec<Obstacle<f64>>,
        formation: Option<FormationSpec<f64>>,
        mut scheduled_orders: Vec<ScheduledOrder>,
    ) -> Result<Self, EngineError> {
        let check = |name: &'static str, ok: bool, reason: &'static str| {
            if ok {
                Ok(())
            } else {
                Err(EngineError::InvalidConfig { name, reason })
            }
        };
        check(
            "dt_s",
            config.dt_s.is_finite() && config.dt_s > 0.0,
            "must be finite and positive",
        )?;
        check("ticks", config.ticks >= 1, "must be at least 1")?;
        check(
            "market_interval",
            config.market_interval >= 1,
            "must be at least 1",
        )?;
        check(
            "max_slew_rate_rad_s",
            config.max_slew_rate_rad_s.is_finite() && config.max_slew_rate_rad_s > 0.0,
            "must be finite and positive",
        )?;
        config.coupling.validate()?;

        let mut index_by_id = BTreeMap::new();
        for (i, agent) in agents.iter().enumerate() {
            if agent.id.is_empty() {
                return Err(EngineError::EmptyAgentId);
            }
            if index_by_id.insert(agent.id.clone(), i).is_some() {
                return Err(EngineError::DuplicateAgentId(agent.id.clone()));
            }
            validate_agent(agent)?;
        }
        if let Some(spec) = &formation {
            for member in spec.members() {
                let idx = index_by_id
                    .get(member)
                    .ok_or_else(|| EngineError::UnknownAgent(member.clone()))?;
                if agents[*idx].kind != AgentKind::Mobile {
                    return Err(EngineError::FormationMemberNotMobile(member.clone()));
                }
            }
        }
        for scheduled in &scheduled_orders {
            if !index_by_id.contains_key(&scheduled.order.agent_id) {
                return Err(EngineError::UnknownAgent(scheduled.order.agent_id.clone()));
            }
            if scheduled.submit_tick < 1 || scheduled.submit_tick > config.ticks {
                return Err(EngineError::OrderBeyondRun {
                    id: scheduled.order.id.clone(),
                    tick: scheduled.submit_tick,
                });
            }
        }
        scheduled_orders.sort_by(|a, b| {
            a.submit_tick
                .cmp(&b.submit_tick)
                .then_with(|| a.order.id.cmp(&b.order.id))
        });
        let initial_soc_wh = agents.iter().map(|a| a.store.total_soc_wh()).sum();
        Ok(SimState {
            config,
            agents,
            index_by_id,
            obstacles,
            formation,
            scheduled_orders,
            market: Market::new(),
            sessions: Vec::new(),
            tick: 0,
            metrics: Vec::new(),
            faults: Vec::new(),
            fulfillment_ticks: BTreeMap::new(),
            demand: BTreeMap::new(),
            initial_soc_wh,
            total_delivered_wh: 0.0,
            total_losses_wh: 0.0,
            total_rejected_wh: 0.0,
            total_motion_wh: 0.0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn agent(&self, id: &str) -> Option<&Agent> {
        self.index_by_id.get(id).map(|&i| &self.agents[i])
    }

    pub fn market(&self) -> &Market {
        &self.market
    }

    pub fn sessions(&self) -> &[WptSession] {
        &self.sessions
    }

    pub fn metrics(&self) -> &[TickMetrics] {
        &self.metrics
    }

    pub fn faults(&self) -> &[FaultEvent] {
        &self.faults
    }

    /// Tick at which a contract was fulfilled, if it was.
    pub fn fulfillment_tick(&self, contract_id: &str) -> Option<u64> {
        self.fulfillment_ticks.get(contract_id).copied()
    }

    /// Fraction of all demanded bid energy that was delivered no later than
    /// each bid's deadline; 1 when nothing was demanded.
    pub fn availability(&self) -> f64 {
        let demanded: f64 = self.demand.values().map(|d| d.quantity_wh).sum();
        if demanded == 0.0 {
            return 1.0;
        }
        let fulfilled: f64 = self
            .demand
            .values()
            .map(|d| d.fulfilled_by_deadline_wh)
            .sum();
        fulfilled / demanded
    }

    pub fn total_delivered_wh(&self) -> f64 {
        self.total_delivered_wh
    }

    pub fn total_losses_wh(&self) -> f64 {
        self.total_losses_wh
    }

    pub fn total_rejected_wh(&self) -> f64 {
        self.total_rejected_wh
    }

    pub fn total_motion_wh(&self) -> f64 {
        self.total_motion_wh
    }

    pub fn total_soc_wh(&self) -> f64 {
        self.agents.iter().map(|a| a.store.total_soc_wh()).sum()
    }

    /// Energy-balance residual of the run so far:
    /// `(soc_now - soc_initial) + losses + rejected + motion`, Wh.
    /// Exact bookkeeping keeps this within rounding noise of zero.
    pub fn conservation_residual_wh(&self) -> f64 {
        (self.total_soc_wh() - self.initial_soc_wh)
            + self.total_losses_wh
            + self.total_rejected_wh
            + self.total_motion_wh
    }

    /// Advances the simulation one tick through the fixed phase sequence.
    pub fn step(&mut self) -> Result<(), EngineError> {
        if self.tick >= self.config.ticks {
            return Err(EngineError::RunComplete);
        }
        self.tick += 1;
        let tick = self.tick;
        let dt = self.config.dt_s;
        let faults_before = self.faults.len();
        let mut tick_delivered = 0.0f64;
        let mut tick_losses = 0.0f64;

        // Phase 1: formation control accelerations.
        let mut commands: BTreeMap<String, Vec3> = BTreeMap::new();
        if let Some(spec) = &self.formation {
            let poses: BTreeMap<String, Pose<f64>> = spec
                .members()
                .iter()
                .map(|id| (id.clone(), self.agents[self.index_by_id[id]].pose))
                .collect();
            commands = formation_control(spec, &poses)?;
        }

        // Phase 2: integrate mobile agents, clamp speed, slew transmitters.
        for agent in &mut self.agents {
            if agent.kind != AgentKind::Mobile {
                continue;
            }
            let accel = commands.get(&agent.id).copied().unwrap_or_else(Vec3::zeros);
            let mut pose = integrate_motion(&agent.pose, &accel, dt)?;
            let speed = pose.speed();
            if speed > agent.max_speed_m_s {
                let scale = if speed > 0.0 {
                    agent.max_speed_m_s / speed
                } else {
                    0.0
                };
                pose = pose.with_velocity(pose.velocity * scale);
            }
            agent.pose = pose;
        }
        // Each transmitter tracks the receiver of its first active session.
        let slew_budget = self.config.max_slew_rate_rad_s * dt;
        let mut slewed: Vec<bool> = vec![false; self.agents.len()];
        for session in &self.sessions {
            if session.state != SessionState::Active || slewed[session.tx] {
                continue;
            }
            slewed[session.tx] = true;
            let target = self.agents[session.rx].pose.position;
            let tx_pose = &self.agents[session.tx].pose;
            if target != tx_pose.position {
                self.agents[session.tx].pose = track_target(tx_pose, &target, slew_budget)?;
            }
        }

        // Phase 3: market bookkeeping — expiry, scheduled submissions, and
        // (on clearing ticks) matching.
        let expired = self.market.expire(tick);
        for contract_id in &expired.expired_contracts {
            self.sessions.retain(|s| &s.contract_id != contract_id);
        }
        let due: Vec<ScheduledOrder> = self
            .scheduled_orders
            .iter()
            .filter(|s| s.submit_tick == tick)
            .cloned()
            .collect();
        for scheduled in due {
            if scheduled.order.side == Side::Bid {
                self.demand
                    .insert(scheduled.order.id.clone(), per_bid_demand(&scheduled.order));
            }
            self.market.submit_order(scheduled.order, tick)?;
        }
        if (tick - 1) % self.config.market_interval == 0 {
            let agents = &self.agents;
            let index_by_id = &self.index_by_id;
            let dt_s = self.config.dt_s;
            let contracts = self.market.clear(
                |bid, offer| {
                    let (Some(&b), Some(&o)) = (
                        index_by_id.get(&bid.agent_id),
                        index_by_id.get(&offer.agent_id),
                    ) else {
                        return false;
                    };
                    rendezvous_feasible(&agents[o], &agents[b], offer, bid, tick, dt_s)
                },
                tick,
            );
            for contract in &contracts {
                self.sessions.push(WptSession {
                    contract_id: contract.id.clone(),
                    tx: self.index_by_id[&contract.offer_agent],
                    rx: self.index_by_id[&contract.bid_agent],
                    state: SessionState::Suspended,
                });
            }
        }

        // Phase 4: session supervision — drop sessions of closed contracts,
        // then activate or suspend against geometry, channel, and safety.
        let market = &self.market;
        self.sessions.retain(|s| {
            market
                .contract(&s.contract_id)
                .is_some_and(|c| c.status == ContractStatus::Open)
        });
        let mut safety_faults = Vec::new();
        for session in &mut self.sessions {
            let tx_agent = &self.agents[session.tx];
            let rx_agent = &self.agents[session.rx];
            let tx_cap = tx_agent.transmitter.as_ref().expect("session tx capability");
            let geometry = link_geometry(&tx_agent.pose, &rx_agent.pose, &self.obstacles)?;
            let distance = geometry.distance;
            let both_mobile =
                tx_agent.kind == AgentKind::Mobile && rx_agent.kind == AgentKind::Mobile;
            let relative_speed = (tx_agent.pose.velocity - rx_agent.pose.velocity).norm();
            let margin = self.config.safety.safe_distance(relative_speed);
            let too_close = both_mobile && distance < margin;
            if too_close {
                safety_faults.push(FaultEvent {
                    tick,
                    kind: FaultKind::SafetyViolation,
                    subject: session.contract_id.clone(),
                    detail: format!(
                        "agents {} and {} at {:.3} m, safety margin {:.3} m",
                        tx_agent.id, rx_agent.id, distance, margin
                    ),
                });
            }
            let coupling = self.config.coupling.coupling_at(distance);
            let env =
                link_env_efficiency_with_coupling(&tx_cap.technology, &geometry, Some(coupling));
            session.state = if distance <= tx_cap.max_range_m && env.value > 0.0 && !too_close {
                SessionState::Active
            } else {
                SessionState::Suspended
            };
        }
        self.faults.extend(safety_faults);

        // Phase 5: energy transfer, grouped by receiving agent.
        let mut by_rx: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, session) in self.sessions.iter().enumerate() {
            if session.state == SessionState::Active {
                by_rx.entry(session.rx).or_default().push(i);
            }
        }
        let hours = dt / 3600.0;
        for (&rx_idx, session_indices) in &by_rx {
            // Work out each transmitter's power and drain it at the source.
            let mut offers: Vec<(usize, f64)> = Vec::new(); // (session, W at rx input)
            let mut total_offered_w = 0.0f64;
            for &si in session_indices {
                let session = &self.sessions[si];
                let contract = self
                    .market
                    .contract(&session.contract_id)
                    .expect("open contract");
                let remaining_wh = contract.quantity_wh - contract.delivered_wh;
                if remaining_wh <= 0.0 {
                    continue;
                }
                let tx_agent = &self.agents[session.tx];
                let rx_agent = &self.agents[rx_idx];
                let tx_cap = tx_agent.transmitter.as_ref().expect("session tx capability");
                let rx_cap = rx_agent.receiver.as_ref().expect("session rx capability");
                let geometry =
                    link_geometry(&tx_agent.pose, &rx_agent.pose, &self.obstacles)?;
                let coupling = self.config.coupling.coupling_at(geometry.distance);
                let env = link_env_efficiency_with_coupling(
                    &tx_cap.technology,
                    &geometry,
                    Some(coupling),
                );
                let chain =
                    EfficiencyChain::new(tx_cap.efficiency, env.value, rx_cap.efficiency)?;
                let eta = end_to_end_efficiency(&chain);
                if eta <= 0.0 {
                    continue;
                }
                let budget_w = self.agents[session.tx].store.dischargeable_power_w(dt);
                // The beam runs at full power for the whole tick, even when
                // less would complete the contract: the delivery credit is
                // capped downstream and the surplus charges the receiver
                // uncredited. Capping power at the exact remainder instead
                // would make the final fulfilment comparison a rounding
                // coin-toss.
                let tx_power_w = tx_cap.max_power_w.min(budget_w);
                if tx_power_w <= 0.0 {
                    continue;
                }
                let drained = self.agents[session.tx]
                    .store
                    .provide_discharge(tx_power_w, dt);
                let sent_wh = drained.delivered_wh;
                tick_losses += drained.loss_wh;
                let offered_w = sent_wh * eta / hours;
                // Propagation loss: emitted energy that never reaches the
                // receiver input.
                tick_losses += sent_wh - offered_w * hours;
                offers.push((si, offered_w));
                total_offered_w += offered_w;
            }
            if total_offered_w <= 0.0 {
                continue;
            }
            let outcome = self.agents[rx_idx].store.accept_charge(total_offered_w, dt);
            tick_losses += outcome.loss_wh;
            self.total_rejected_wh += outcome.rejected_wh;
            // Credit contracts proportionally to their share of the inflow.
            for (si, offered_w) in offers {
                let share = offered_w / total_offered_w;
                let credit_wh = outcome.accepted_wh * share;
                let contract_id = self.sessions[si].contract_id.clone();
                let delivery = self.market.record_delivery(&contract_id, credit_wh, tick)?;
                tick_delivered += delivery.credited_wh;
                self.total_delivered_wh += delivery.credited_wh;
                if delivery.fulfilled {
                    self.fulfillment_ticks.insert(contract_id.clone(), tick);
                }
                let contract = self.market.contract(&contract_id).expect("contract");
                if tick <= contract.bid_deadline {
                    if let Some(demand) = self.demand.get_mut(&contract.bid_id) {
                        demand.fulfilled_by_deadline_wh += delivery.credited_wh;
                    }
                }
            }
        }

        // Phase 6: motion consumption.
        for agent in &mut self.agents {
            if agent.kind != AgentKind::Mobile || agent.pose.speed() == 0.0 {
                continue;
            }
            if agent.motion_power_w <= 0.0 {
                continue;
            }
            let need_wh = agent.motion_power_w * hours;
            let outcome = agent.store.provide_discharge(agent.motion_power_w, dt);
            self.total_motion_wh += outcome.delivered_wh;
            tick_losses += outcome.loss_wh;
            if outcome.delivered_wh + 1e-12 < need_wh {
                self.faults.push(FaultEvent {
                    tick,
                    kind: FaultKind::EnergyShortfall,
                    subject: agent.id.clone(),
                    detail: format!(
                        "motion needed {:.6} Wh but stores supplied {:.6} Wh",
                        need_wh, outcome.delivered_wh
                    ),
                });
            }
        }

        // Phase 7: metrics row.
        self.total_losses_wh += tick_losses;
        let (mut battery, mut supercap) = (0.0f64, 0.0f64);
        for agent in &self.agents {
            battery += agent.store.battery.soc_wh();
            supercap += agent.store.supercap.soc_wh();
        }
        self.metrics.push(TickMetrics {
            tick,
            time_s: tick as f64 * dt,
            soc_battery_wh: battery,
            soc_supercap_wh: supercap,
            delivered_wh: tick_delivered,
            losses_wh: tick_losses,
            faults: (self.faults.len() - faults_before) as u64,
        });
        Ok(())
    }

    /// Runs every remaining tick and renders the artifact files.
    pub fn run(&mut self) -> Result<RunArtifacts, EngineError> {
        while self.tick < self.config.ticks {
            self.step()?;
        }
        Ok(RunArtifacts {
            metrics_csv: self.render_metrics_csv(),
            ledger_jsonl: self.market.ledger().export_jsonl(),
            summary_json: self.render_summary_json(),
        })
    }

    fn render_metrics_csv(&self) -> String {
        let mut out = String::from(
            "tick,time_s,agent_id,soc_battery_wh,soc_supercap_wh,delivered_wh,losses_wh,faults\n",
        );
        for row in &self.metrics {
            out.push_str(&format!(
                "{},{},all,{},{},{},{},{}\n",
                row.tick,
                row.time_s,
                row.soc_battery_wh,
                row.soc_supercap_wh,
                row.delivered_wh,
                row.losses_wh,
                row.faults
            ));
        }
        out
    }

    fn render_summary_json(&self) -> String {
        let agents: Vec<serde_json::Value> = self
            .agents
            .iter()
            .map(|agent| {
                serde_json::json!({
                    "battery_soc_wh": agent.store.battery.soc_wh(),
                    "id": agent.id,
                    "position_m": [
                        agent.pose.position.x,
                        agent.pose.position.y,
                        agent.pose.position.z
                    ],
                    "speed_m_s": agent.pose.speed(),
                    "supercap_soc_wh": agent.store.supercap.soc_wh(),
                })
            })
            .collect();
        let contracts: Vec<serde_json::Value> = self
            .market
            .contracts()
            .map(|c| {
                serde_json::json!({
                    "bid_agent": c.bid_agent,
                    "bid_id": c.bid_id,
                    "clearing_price": c.clearing_price,
                    "delivered_wh": c.delivered_wh,
                    "fulfilled_tick": self.fulfillment_ticks.get(&c.id),
                    "id": c.id,
                    "matched_tick": c.matched_tick,
                    "offer_agent": c.offer_agent,
                    "offer_id": c.offer_id,
                    "quantity_wh": c.quantity_wh,
                    "status": c.status.as_str(),
                })
            })
            .collect();
        let faults: Vec<serde_json::Value> = self
            .faults
            .iter()
            .map(|f| {
                serde_json::json!({
                    "detail": f.detail,
                    "kind": f.kind.as_str(),
                    "subject": f.subject,
                    "tick": f.tick,
                })
            })
            .collect();
        let formation_error_m = self.formation.as_ref().map(|spec| {
            let positions: BTreeMap<String, Vec3> = spec
                .members()
                .iter()
                .map(|id| (id.clone(), self.agents[self.index_by_id[id]].pose.position))
                .collect();
            formation_error(spec, &positions).expect("members present")
        });
        let summary = serde_json::json!({
            "agents": agents,
            "availability": self.availability(),
            "config": {
                "dt_s": self.config.dt_s,
                "market_interval": self.config.market_interval,
                "seed": self.config.seed,
                "ticks": self.config.ticks,
            },
            "contracts": contracts,
            "energy": {
                "conservation_residual_wh": self.conservation_residual_wh(),
                "delivered_wh": self.total_delivered_wh,
                "final_soc_wh": self.total_soc_wh(),
                "initial_soc_wh": self.initial_soc_wh,
                "losses_wh": self.total_losses_wh,
                "motion_wh": self.total_motion_wh,
                "rejected_wh": self.total_rejected_wh,
            },
            "faults": faults,
            "formation_error_m": formation_error_m,
            "ticks_run": self.tick,
        });
        let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        text.push('\n');
        text
    }
}

fn validate_agent(agent: &Agent) -> Result<(), EngineError> {
    let fail = |reason: &str| {
        Err(EngineError::InvalidAgent {
            id: agent.id.clone(),
            reason: reason.to_string(),
        })
    };
    if !(agent.max_speed_m_s.is_finite() && agent.max_speed_m_s >= 0.0) {
        return fail("max_speed_m_s must be finite and non-negative");
    }
    if !(agent.motion_power_w.is_finite() && agent.motion_power_w >= 0.0) {
        return fail("motion_power_w must be finite and non-negative");
    }
    match agent.kind {
        AgentKind::Static => {
            if agent.pose.speed() != 0.0 {
                return fail("static agents must start at rest");
            }
        }
        AgentKind::Mobile => {}
    }
    if let Some(tx) = &agent.transmitter {
        if !(tx.efficiency.is_finite() && (0.0..=1.0).contains(&tx.efficiency)) {
            return fail("transmitter efficiency must lie in [0, 1]");
        }
        if !(tx.max_power_w.is_finite() && tx.max_power_w > 0.0) {
            return fail("transmitter max_power_w must be finite and positive");
        }
        if !(tx.max_range_m.is_finite() && tx.max_range_m > 0.0) {
            return fail("transmitter max_range_m must be finite and positive");
        }
    }
    if let Some(rx) = &agent.receiver {
        if !(rx.efficiency.is_finite() && (0.0..=1.0).contains(&rx.efficiency)) {
            return fail("receiver efficiency must lie in [0, 1]");
        }
    }
    Ok(())
}

/// Whether a bid/offer pair could physically engage before their deadlines:
/// the agents must be distinct, the offer agent must transmit and the bid
/// agent receive the same technology, and the range shortfall must be
/// closable at their combined top speeds within the remaining shared time.
pub fn rendezvous_feasible(
    offer_agent: &Agent,
    bid_agent: &Agent,
    offer: &Order,
    bid: &Order,
    tick: u64,
    dt_s: f64,
) -> bool {
    if offer_agent.id == bid_agent.id {
        return false;
    }
    let (Some(tx), Some(rx)) = (&offer_agent.transmitter, &bid_agent.receiver) else {
        return false;
    };
    if tx.technology.kind() != rx.technology {
        return false;
    }
    let distance = (offer_agent.pose.position - bid_agent.pose.position).norm();
    let gap = (distance - tx.max_range_m).max(0.0);
    if gap == 0.0 {
        return true;
    }
    let shared_deadline = offer.deadline.min(bid.deadline);
    if shared_deadline <= tick {
        return false;
    }
    let time_left_s = (shared_deadline - tick) as f64 * dt_s;
    let closing_speed = offer_agent.max_speed_m_s + bid_agent.max_speed_m_s;
    gap <= closing_speed * time_left_s
}

/// Default hardware conversion efficiencies and service range for each link
/// technology, used when a scenario omits them.
pub fn technology_defaults(kind: TechnologyKind) -> (f64, f64, f64) {
    let max_range_m = match kind {
        TechnologyKind::OwptLed => 5.0,
        TechnologyKind::Laser => 50.0,
        TechnologyKind::Rf => 20.0,
        TechnologyKind::Iwpt => 0.5,
        TechnologyKind::Cwpt => 0.2,
    };
    (0.9, 0.9, max_range_m)
}
