//! Ground-truth synthesis: trajectories, LOS chains, inertial readings and
//! pairwise range measurements.

mod config;
mod io;

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use config::{AnchorLayout, ScenarioConfig};
pub use io::{read_scenario, write_scenario, SCENARIO_FORMAT, SCENARIO_VERSION};

use crate::error::{Error, Result};
use crate::model::{stationary_distribution, LosIndicator};
use crate::rng::{pair_id, substream, Purpose};
use crate::runtime::neighbor_discovery;
use crate::types::{NodeId, NodeKind, PairKey, Position};

/// One range reading shared by both endpoints of a link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangingMeasurement {
    pub t: usize,
    pub k: NodeId,
    pub m: NodeId,
    pub theta: f64,
}

impl RangingMeasurement {
    pub fn pair(&self) -> PairKey {
        PairKey::new(self.k, self.m)
    }

    pub fn involves(&self, id: NodeId) -> bool {
        self.k == id || self.m == id
    }

    pub fn other(&self, id: NodeId) -> NodeId {
        if self.k == id {
            self.m
        } else {
            self.k
        }
    }
}

/// Noisy displacement of a mobile node over `[t-1, t]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InsReading {
    pub t: usize,
    pub k: NodeId,
    pub dx: f64,
    pub dy: f64,
}

/// True state of the world for every step `0..=n_steps`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub kinds: Vec<NodeKind>,
    /// `positions[node][t]`; anchors hold a single entry.
    positions: Vec<Vec<Position>>,
    /// `z_states[pair][t]` for every pair with at least one mobile endpoint.
    pub z_states: BTreeMap<PairKey, Vec<LosIndicator>>,
    pub n_steps: usize,
}

impl GroundTruth {
    pub fn new(
        kinds: Vec<NodeKind>,
        positions: Vec<Vec<Position>>,
        z_states: BTreeMap<PairKey, Vec<LosIndicator>>,
        n_steps: usize,
    ) -> Result<Self> {
        if kinds.len() != positions.len() {
            return Err(Error::config("one position track per node is required"));
        }
        for (kind, track) in kinds.iter().zip(&positions) {
            let want = match kind {
                NodeKind::Anchor => 1,
                NodeKind::Mobile => n_steps + 1,
            };
            if track.len() != want {
                return Err(Error::config(format!(
                    "{kind:?} track has {} entries, expected {want}",
                    track.len()
                )));
            }
        }
        if z_states.values().any(|c| c.len() != n_steps + 1) {
            return Err(Error::config("LOS chains must cover every step"));
        }
        Ok(GroundTruth {
            kinds,
            positions,
            z_states,
            n_steps,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.kinds[id.index()]
    }

    pub fn position(&self, id: NodeId, t: usize) -> Position {
        let track = &self.positions[id.index()];
        match self.kinds[id.index()] {
            NodeKind::Anchor => track[0],
            NodeKind::Mobile => track[t],
        }
    }

    pub fn positions_at(&self, t: usize) -> Vec<Position> {
        (0..self.n_nodes())
            .map(|i| self.position(NodeId(i as u32), t))
            .collect()
    }

    pub fn track(&self, id: NodeId) -> &[Position] {
        &self.positions[id.index()]
    }

    pub fn z(&self, pair: PairKey, t: usize) -> Option<LosIndicator> {
        self.z_states.get(&pair).map(|chain| chain[t])
    }

    pub fn mobile_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids_of(NodeKind::Mobile)
    }

    pub fn anchor_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids_of(NodeKind::Anchor)
    }

    fn ids_of(&self, kind: NodeKind) -> impl Iterator<Item = NodeId> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .filter(move |(_, k)| **k == kind)
            .map(|(i, _)| NodeId(i as u32))
    }
}

/// A fully generated scenario: truth plus the observation streams.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub truth: GroundTruth,
    /// `measurements[t]`, empty at `t = 0`.
    pub measurements: Vec<Vec<RangingMeasurement>>,
    /// `ins[t][k]` for each mobile node `k`, empty at `t = 0`.
    pub ins: Vec<Vec<InsReading>>,
}

impl Scenario {
    pub fn generate(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let mut truth = generate_trajectories(config)?;
        truth.z_states = evolve_z_chains(config, &truth.kinds)?;
        let measurements = (0..=config.n_steps)
            .map(|t| if t == 0 { Ok(Vec::new()) } else { generate_measurements(&truth, config, t) })
            .collect::<Result<Vec<_>>>()?;
        let ins = (0..=config.n_steps)
            .map(|t| {
                if t == 0 {
                    return Ok(Vec::new());
                }
                truth
                    .mobile_ids()
                    .map(|k| generate_ins(&truth, config, k, t))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Scenario {
            config: config.clone(),
            truth,
            measurements,
            ins,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.config.n_steps
    }

    pub fn ins_for(&self, k: NodeId, t: usize) -> Option<&InsReading> {
        self.ins.get(t)?.get(k.index()).filter(|r| r.k == k)
    }
}

fn mobile_position(config: &ScenarioConfig, start: Position, t: usize) -> Position {
    let tf = t as f64;
    let x = start.x + config.velocity_per_step * tf;
    let y = start.y + config.curve_amplitude * (TAU * tf / config.curve_period).sin();
    Position::new(x.clamp(0.0, config.grid_width), y.clamp(0.0, config.grid_height))
}

/// Mobile tracks follow `(x0 + u·t, y0 + A·sin(2πt/P))` clipped to the grid;
/// anchors are placed by the configured layout. LOS chains are left empty.
pub fn generate_trajectories(config: &ScenarioConfig) -> Result<GroundTruth> {
    config.validate()?;
    let anchors = config
        .anchor_layout
        .place(config.n_anchor, config.grid_width, config.grid_height)?;
    let mut kinds = Vec::with_capacity(config.n_nodes());
    let mut positions = Vec::with_capacity(config.n_nodes());
    for k in 0..config.n_mobile {
        let mut rng = substream(config.seed, Purpose::InitialPosition, k as u64, 0);
        let start = Position::new(
            rng.random::<f64>() * config.start_fraction * config.grid_width,
            rng.random::<f64>() * config.grid_height,
        );
        kinds.push(NodeKind::Mobile);
        positions.push(
            (0..=config.n_steps)
                .map(|t| mobile_position(config, start, t))
                .collect(),
        );
    }
    for a in anchors {
        kinds.push(NodeKind::Anchor);
        positions.push(vec![a]);
    }
    GroundTruth::new(kinds, positions, BTreeMap::new(), config.n_steps)
}

/// One independent chain per pair with a mobile endpoint, started from the
/// stationary distribution. Chains evolve whether or not the pair is in range.
pub fn evolve_z_chains(
    config: &ScenarioConfig,
    kinds: &[NodeKind],
) -> Result<BTreeMap<PairKey, Vec<LosIndicator>>> {
    let trans = config.transition()?;
    let pi_los = stationary_distribution(&trans)
        .map(|(_, pi1)| pi1)
        .unwrap_or(config.params.alpha());
    let mut chains = BTreeMap::new();
    for i in 0..kinds.len() {
        for j in (i + 1)..kinds.len() {
            if kinds[i] == NodeKind::Anchor && kinds[j] == NodeKind::Anchor {
                continue;
            }
            let pair = PairKey::new(NodeId(i as u32), NodeId(j as u32));
            let mut rng = substream(config.seed, Purpose::LosChain, pair_id(i as u32, j as u32), 0);
            let mut z = LosIndicator::from_bool(rng.random::<f64>() < pi_los);
            let mut chain = Vec::with_capacity(config.n_steps + 1);
            chain.push(z);
            for _ in 0..config.n_steps {
                z = trans.sample_next(z, &mut rng);
                chain.push(z);
            }
            chains.insert(pair, chain);
        }
    }
    Ok(chains)
}

/// All readings at step `t`: one per unordered pair strictly within range.
pub fn generate_measurements(
    truth: &GroundTruth,
    config: &ScenarioConfig,
    t: usize,
) -> Result<Vec<RangingMeasurement>> {
    let positions = truth.positions_at(t);
    let mut out = Vec::new();
    for pair in neighbor_discovery(&positions, config.comm_radius) {
        let Some(z) = truth.z(pair, t) else {
            // anchor-anchor link
            continue;
        };
        let d = positions[pair.lo.index()].distance(&positions[pair.hi.index()]);
        let mut rng = substream(config.seed, Purpose::Measurement, pair_id(pair.lo.0, pair.hi.0), t as u64);
        out.push(RangingMeasurement {
            t,
            k: pair.lo,
            m: pair.hi,
            theta: config.params.sample_range(d, z, &mut rng),
        });
    }
    Ok(out)
}

/// True displacement over `[t-1, t]` plus white Gaussian noise per axis.
pub fn generate_ins(truth: &GroundTruth, config: &ScenarioConfig, k: NodeId, t: usize) -> Result<InsReading> {
    if k.index() >= truth.n_nodes() {
        return Err(Error::UnknownNode(k));
    }
    if truth.kind(k) == NodeKind::Anchor {
        return Err(Error::AnchorNode(k));
    }
    if t == 0 || t > truth.n_steps {
        return Err(Error::domain(format!("inertial readings exist for steps 1..={}, got {t}", truth.n_steps)));
    }
    let delta = truth.position(k, t) - truth.position(k, t - 1);
    let sigma = config.params.sigma_ins();
    let (nx, ny) = if sigma > 0.0 {
        let mut rng = substream(config.seed, Purpose::Inertial, k.0 as u64, t as u64);
        let normal = Normal::new(0.0, sigma).expect("validated sigma");
        (normal.sample(&mut rng), normal.sample(&mut rng))
    } else {
        (0.0, 0.0)
    };
    Ok(InsReading {
        t,
        k,
        dx: delta.x + nx,
        dy: delta.y + ny,
    })
}
