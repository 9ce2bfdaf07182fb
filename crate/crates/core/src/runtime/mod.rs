//! Step-by-step orchestration of the cooperative protocol.
//!
//! Each epoch runs in barrier-separated phases:
//!
//! 1. deliver the broadcasts produced at the previous step;
//! 2. take this step's readings and inertial displacements from the scenario;
//! 3. step every mobile node (in parallel), using only the phase-1 snapshot
//!    of neighbor estimates;
//! 4. broadcast the new estimates and append the epoch log.

mod bus;
mod discovery;
mod log;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bus::{BroadcastMessage, ChannelHooks, InProcessBus, Transport};
pub use discovery::neighbor_discovery;
pub use log::{read_log, write_log, EpochLog, Estimator, LinkRecord, LogHeader, NodeRecord, LOG_FORMAT, LOG_VERSION};

use crate::baselines::{genie_ml_estimate, ransac_estimate, AnchoredRange, MlConfig, RansacConfig};
use crate::error::{Error, Result};
use crate::filter::{init_filter, FilterConfig, FilterState, LinkReading, Particle};
use crate::model::{stationary_distribution, LosTransition, MixtureParams};
use crate::rng::{substream, Purpose};
use crate::scenario::Scenario;
use crate::types::{NodeId, NodeKind, PairKey, Position};

/// Initial prior for mobile filters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bootstrap {
    /// Disc of radius `init_spread` around the true starting position.
    #[default]
    TruePosition,
    /// Uniform over the whole grid.
    Uniform,
}

/// How a node turns a neighbor's last broadcast into the position it ranges against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeighborPrediction {
    /// Use the broadcast estimate as is.
    Snapshot,
    /// Carry the estimate forward by its age times the sender's smoothed
    /// inertial velocity.
    #[default]
    Extrapolate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuntimeConfig {
    pub filter: FilterConfig,
    /// Baselines to run next to the particle filter, which always runs
    /// because its estimates are what nodes broadcast.
    pub estimators: Vec<Estimator>,
    pub bootstrap: Bootstrap,
    pub neighbor_prediction: NeighborPrediction,
    /// Weight of the newest inertial reading in the broadcast velocity; the
    /// first `1 / velocity_smoothing` readings are averaged uniformly.
    pub velocity_smoothing: f64,
    /// Worker threads for phase 3; `0` uses the global pool.
    pub workers: usize,
    pub ml: MlConfig,
    pub ransac: RansacConfig,
    pub channel: ChannelHooks,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            filter: FilterConfig::default(),
            estimators: vec![Estimator::ParticleFilter],
            bootstrap: Bootstrap::TruePosition,
            neighbor_prediction: NeighborPrediction::Extrapolate,
            velocity_smoothing: 0.1,
            workers: 0,
            ml: MlConfig::default(),
            ransac: RansacConfig::default(),
            channel: ChannelHooks::default(),
        }
    }
}

impl RuntimeConfig {
    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        self.ml.validate()?;
        if !(self.velocity_smoothing > 0.0 && self.velocity_smoothing <= 1.0) {
            return Err(Error::config(format!(
                "velocity_smoothing must lie in (0, 1], got {}",
                self.velocity_smoothing
            )));
        }
        let p = self.channel.loss_probability;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::config(format!("loss_probability must lie in [0, 1], got {p}")));
        }
        Ok(())
    }

    fn runs(&self, e: Estimator) -> bool {
        self.estimators.contains(&e)
    }
}

#[derive(Clone, Debug)]
pub struct MobileNode {
    pub id: NodeId,
    pub filter: FilterState,
    ml: Position,
    ransac: Position,
    velocity: Position,
    readings_seen: usize,
}

#[derive(Clone, Debug)]
pub enum NodeHandle {
    Mobile(Box<MobileNode>),
    Anchor { id: NodeId, position: Position },
}

impl NodeHandle {
    pub fn id(&self) -> NodeId {
        match self {
            NodeHandle::Mobile(m) => m.id,
            NodeHandle::Anchor { id, .. } => *id,
        }
    }
}

/// Everything a node may read during phase 3 of step `t`.
struct Snapshot<'a> {
    t: usize,
    seed: u64,
    scenario: &'a Scenario,
    view: &'a [Option<BroadcastMessage>],
    links: &'a [Vec<(NodeId, f64)>],
    config: &'a RuntimeConfig,
    params: MixtureParams,
    trans: LosTransition,
    pi_los: f64,
}

struct NodeOutcome {
    record: NodeRecord,
    reset: bool,
    degenerate: bool,
}

impl MobileNode {
    fn step(&mut self, snap: &Snapshot<'_>) -> Result<NodeOutcome> {
        let t = snap.t;
        let truth = &snap.scenario.truth;
        let fc = &snap.config.filter;
        let mut rng = substream(snap.seed, Purpose::FilterStep, u64::from(self.id.0), t as u64);
        let ins = *snap
            .scenario
            .ins_for(self.id, t)
            .ok_or_else(|| Error::config(format!("missing inertial reading for node {} at step {t}", self.id)))?;

        self.filter.predict(&ins, &snap.params, &mut rng);
        self.readings_seen += 1;
        let gain = (1.0 / self.readings_seen as f64).max(snap.config.velocity_smoothing);
        self.velocity = Position::new(
            self.velocity.x + gain * (ins.dx - self.velocity.x),
            self.velocity.y + gain * (ins.dy - self.velocity.y),
        );

        let links = &snap.links[self.id.index()];
        let mut readings = Vec::with_capacity(links.len());
        let mut est_steps = Vec::with_capacity(links.len());
        for &(m, theta) in links {
            let msg = snap.view[m.index()];
            est_steps.push(msg.map(|b| b.t));
            if let Some(msg) = msg {
                let neighbor_est = match snap.config.neighbor_prediction {
                    NeighborPrediction::Snapshot => msg.payload,
                    NeighborPrediction::Extrapolate => msg.extrapolate(t),
                };
                readings.push(LinkReading { neighbor: m, theta, neighbor_est });
            }
        }

        let previous = self.filter.estimate();
        let mut degenerate = false;
        match self
            .filter
            .measurement_update(&readings, &snap.trans, &snap.params, fc.belief_retention)
        {
            Ok(()) => {}
            Err(Error::TotalDegeneracy) => {
                degenerate = true;
                self.filter.reset_around(previous, fc.reset_radius, snap.pi_los, &mut rng);
            }
            Err(e) => return Err(e),
        }
        self.filter.maybe_resample(fc, &mut rng);
        let reset = self.filter.maybe_reset(fc, snap.pi_los, &mut rng) || degenerate;
        let estimate = self.filter.refresh_estimate();
        self.filter.refresh_detections(readings.iter().map(|r| r.neighbor))?;

        let mut record = NodeRecord {
            t,
            id: self.id,
            kind: NodeKind::Mobile,
            truth: truth.position(self.id, t),
            estimates: Default::default(),
            errors: Default::default(),
            links: Vec::with_capacity(links.len()),
        };
        for (&(m, theta), est_step) in links.iter().zip(est_steps) {
            let true_z = truth
                .z(PairKey::new(self.id, m), t)
                .ok_or_else(|| Error::config(format!("no LOS chain for pair {}-{m}", self.id)))?;
            record.links.push(LinkRecord {
                neighbor: m,
                theta,
                true_z,
                detected_z: self.filter.detections().get(&m).copied(),
                est_step,
            });
        }
        record.set_estimate(Estimator::ParticleFilter, estimate);

        let step = Position::new(ins.dx, ins.dy);
        if snap.config.runs(Estimator::GenieMl) {
            // genie: true neighbor positions at this step
            let ranges: Vec<AnchoredRange> = links
                .iter()
                .map(|&(m, theta)| AnchoredRange { neighbor: truth.position(m, t), theta })
                .collect();
            let est = genie_ml_estimate(&ranges, self.ml + step, &snap.params, &snap.config.ml)?;
            self.ml = est.position;
            record.set_estimate(Estimator::GenieMl, self.ml);
        }
        if snap.config.runs(Estimator::Ransac) {
            let ranges: Vec<AnchoredRange> = readings
                .iter()
                .map(|r| AnchoredRange { neighbor: r.neighbor_est, theta: r.theta })
                .collect();
            let mut rng = substream(snap.seed, Purpose::Ransac, u64::from(self.id.0), t as u64);
            self.ransac = match ransac_estimate(&ranges, &snap.params, &snap.config.ransac, &mut rng) {
                Ok(p) => p,
                Err(Error::TooFewNeighbors { .. } | Error::NoConsensus) => self.ransac + step,
                Err(e) => return Err(e),
            };
            record.set_estimate(Estimator::Ransac, self.ransac);
        }
        Ok(NodeOutcome { record, reset, degenerate })
    }
}

pub struct Runtime<'a> {
    scenario: &'a Scenario,
    config: RuntimeConfig,
    nodes: Vec<NodeHandle>,
    bus: Box<dyn Transport + 'a>,
    view: Vec<Option<BroadcastMessage>>,
    trans: LosTransition,
    pi_los: f64,
    pool: Option<rayon::ThreadPool>,
    next_step: usize,
}

impl<'a> Runtime<'a> {
    pub fn new(scenario: &'a Scenario, config: RuntimeConfig) -> Result<Self> {
        let bus = InProcessBus::new(config.channel, scenario.config.seed);
        Self::with_transport(scenario, config, Box::new(bus))
    }

    pub fn with_transport(scenario: &'a Scenario, config: RuntimeConfig, bus: Box<dyn Transport + 'a>) -> Result<Self> {
        config.validate()?;
        let sc = &scenario.config;
        let trans = sc.transition()?;
        let pi_los = stationary_distribution(&trans)
            .map(|(_, pi1)| pi1)
            .unwrap_or(sc.params.alpha());
        let truth = &scenario.truth;
        let mut nodes = Vec::with_capacity(truth.n_nodes());
        for i in 0..truth.n_nodes() {
            let id = NodeId(i as u32);
            let start = truth.position(id, 0);
            nodes.push(match truth.kind(id) {
                NodeKind::Anchor => NodeHandle::Anchor { id, position: start },
                NodeKind::Mobile => {
                    let mut rng = substream(sc.seed, Purpose::FilterInit, u64::from(id.0), 0);
                    let mut filter = init_filter(id, start, &config.filter, &mut rng)?;
                    if config.bootstrap == Bootstrap::Uniform {
                        let k = config.filter.particle_count;
                        let cloud = (0..k)
                            .map(|_| Particle {
                                position: Position::new(
                                    rand::Rng::random::<f64>(&mut rng) * sc.grid_width,
                                    rand::Rng::random::<f64>(&mut rng) * sc.grid_height,
                                ),
                                log_weight: 0.0,
                            })
                            .collect();
                        filter.set_particles(cloud)?;
                        filter.refresh_estimate();
                    }
                    let prior = filter.estimate();
                    NodeHandle::Mobile(Box::new(MobileNode {
                        id,
                        filter,
                        ml: prior,
                        ransac: prior,
                        velocity: Position::default(),
                        readings_seen: 0,
                    }))
                }
            });
        }
        let pool = match config.workers {
            0 => None,
            n => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::config(format!("cannot build worker pool: {e}")))?,
            ),
        };
        let mut rt = Runtime {
            scenario,
            config,
            view: vec![None; nodes.len()],
            nodes,
            bus,
            trans,
            pi_los,
            pool,
            next_step: 1,
        };
        rt.broadcast_all(0);
        Ok(rt)
    }

    pub fn nodes(&self) -> &[NodeHandle] {
        &self.nodes
    }

    fn broadcast_all(&mut self, t: usize) {
        for node in &self.nodes {
            let (sender, payload, velocity) = match node {
                NodeHandle::Mobile(m) => (m.id, m.filter.estimate(), m.velocity),
                NodeHandle::Anchor { id, position } => (*id, *position, Position::default()),
            };
            self.bus.broadcast(BroadcastMessage { sender, t, payload, velocity });
        }
    }

    /// Run phases 1–4 for step `t`. Steps must be taken in order.
    pub fn step_epoch(&mut self, t: usize) -> Result<EpochLog> {
        if t != self.next_step || t > self.scenario.n_steps() {
            return Err(Error::config(format!(
                "expected step {} (of {}), got {t}",
                self.next_step,
                self.scenario.n_steps()
            )));
        }

        // phase 1
        for msg in self.bus.collect(t) {
            let slot = &mut self.view[msg.sender.index()];
            if slot.is_none_or(|old| old.t <= msg.t) {
                *slot = Some(msg);
            }
        }

        // phase 2
        let measurements = &self.scenario.measurements[t];
        let mut links: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); self.nodes.len()];
        for m in measurements {
            links[m.k.index()].push((m.m, m.theta));
            links[m.m.index()].push((m.k, m.theta));
        }

        // phase 3
        let snap = Snapshot {
            t,
            seed: self.scenario.config.seed,
            scenario: self.scenario,
            view: &self.view,
            links: &links,
            config: &self.config,
            params: self.scenario.config.params,
            trans: self.trans,
            pi_los: self.pi_los,
        };
        let work = |nodes: &mut Vec<NodeHandle>| -> Vec<Result<Option<NodeOutcome>>> {
            nodes
                .par_iter_mut()
                .map(|node| match node {
                    NodeHandle::Mobile(m) => m.step(&snap).map(Some),
                    NodeHandle::Anchor { .. } => Ok(None),
                })
                .collect()
        };
        let outcomes = match &self.pool {
            Some(pool) => pool.install(|| work(&mut self.nodes)),
            None => work(&mut self.nodes),
        };

        // phase 4
        let mut log = EpochLog {
            t,
            measurement_count: measurements.len(),
            ..EpochLog::default()
        };
        for (node, outcome) in self.nodes.iter().zip(outcomes) {
            match outcome? {
                Some(o) => {
                    if o.reset {
                        log.resets.push(o.record.id);
                    }
                    if o.degenerate {
                        log.degenerate.push(o.record.id);
                    }
                    log.records.push(o.record);
                }
                None => {
                    let id = node.id();
                    log.records.push(NodeRecord {
                        t,
                        id,
                        kind: NodeKind::Anchor,
                        truth: self.scenario.truth.position(id, t),
                        estimates: Default::default(),
                        errors: Default::default(),
                        links: Vec::new(),
                    });
                }
            }
        }
        self.broadcast_all(t);
        self.next_step = t + 1;
        Ok(log)
    }

    /// Run the next `steps` epochs (capped at the scenario length).
    pub fn run_for(&mut self, steps: usize) -> Result<Vec<EpochLog>> {
        let last = (self.next_step + steps).min(self.scenario.n_steps() + 1);
        (self.next_step..last).map(|t| self.step_epoch(t)).collect()
    }

    /// Run every remaining epoch.
    pub fn run(&mut self) -> Result<Vec<EpochLog>> {
        self.run_for(self.scenario.n_steps())
    }
}

/// Build a runtime and run the whole scenario.
pub fn run(scenario: &Scenario, config: &RuntimeConfig) -> Result<Vec<EpochLog>> {
    Runtime::new(scenario, config.clone())?.run()
}
