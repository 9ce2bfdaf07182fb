//! Scenario files.
//!
//! A scenario file is UTF-8 text with one JSON object per line. The first
//! line is a header:
//!
//! ```text
//! {"format":"p2ploc-scenario","version":1,"config":{...}}
//! ```
//!
//! followed by records distinguished by their `rec` field:
//!
//! | `rec`  | fields                          | meaning                                 |
//! |--------|---------------------------------|-----------------------------------------|
//! | `node` | `id`, `kind`                    | node identity, `mobile` or `anchor`     |
//! | `pos`  | `node`, `t`, `x`, `y`           | true position (anchors: `t = 0` only)   |
//! | `z`    | `lo`, `hi`, `chain`             | LOS chain as a `0`/`1` string, one char per step `0..=T` |
//! | `meas` | `t`, `k`, `m`, `theta`          | range reading shared by `k` and `m`     |
//! | `ins`  | `t`, `k`, `dx`, `dy`            | inertial displacement over `[t-1, t]`   |
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces the in-memory scenario bit for bit.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{GroundTruth, InsReading, RangingMeasurement, Scenario, ScenarioConfig};
use crate::error::{Error, Result};
use crate::model::LosIndicator;
use crate::types::{NodeId, NodeKind, PairKey, Position};

pub const SCENARIO_FORMAT: &str = "p2ploc-scenario";
pub const SCENARIO_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    config: ScenarioConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "rec", rename_all = "lowercase")]
enum Record {
    Node { id: NodeId, kind: NodeKind },
    Pos { node: NodeId, t: usize, x: f64, y: f64 },
    Z { lo: NodeId, hi: NodeId, chain: String },
    Meas { t: usize, k: NodeId, m: NodeId, theta: f64 },
    Ins { t: usize, k: NodeId, dx: f64, dy: f64 },
}

fn line<W: Write>(w: &mut W, value: &impl Serialize) -> Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_scenario<W: Write>(scenario: &Scenario, mut w: W) -> Result<()> {
    line(
        &mut w,
        &Header {
            format: SCENARIO_FORMAT.to_string(),
            version: SCENARIO_VERSION,
            config: scenario.config.clone(),
        },
    )?;
    let truth = &scenario.truth;
    for (i, kind) in truth.kinds.iter().enumerate() {
        line(&mut w, &Record::Node { id: NodeId(i as u32), kind: *kind })?;
    }
    for (i, _) in truth.kinds.iter().enumerate() {
        let id = NodeId(i as u32);
        for (t, p) in truth.track(id).iter().enumerate() {
            line(&mut w, &Record::Pos { node: id, t, x: p.x, y: p.y })?;
        }
    }
    for (pair, chain) in &truth.z_states {
        let chain = chain.iter().map(|z| if z.is_los() { '1' } else { '0' }).collect();
        line(&mut w, &Record::Z { lo: pair.lo, hi: pair.hi, chain })?;
    }
    for m in scenario.measurements.iter().flatten() {
        line(&mut w, &Record::Meas { t: m.t, k: m.k, m: m.m, theta: m.theta })?;
    }
    for r in scenario.ins.iter().flatten() {
        line(&mut w, &Record::Ins { t: r.t, k: r.k, dx: r.dx, dy: r.dy })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scenario<R: BufRead>(r: R) -> Result<Scenario> {
    let mut lines = r.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or(Error::Format { line: 1, msg: "empty scenario file".into() })?;
    let header: Header = serde_json::from_str(&first?).map_err(|e| Error::Format { line: 1, msg: e.to_string() })?;
    if header.format != SCENARIO_FORMAT || header.version != SCENARIO_VERSION {
        return Err(Error::Format {
            line: 1,
            msg: format!("unsupported format {} v{}", header.format, header.version),
        });
    }
    let config = header.config;
    config.validate()?;
    let n_steps = config.n_steps;

    let mut kinds: Vec<NodeKind> = Vec::new();
    let mut positions: Vec<Vec<Option<Position>>> = Vec::new();
    let mut z_states = BTreeMap::new();
    let mut measurements = vec![Vec::new(); n_steps + 1];
    let mut ins = vec![Vec::new(); n_steps + 1];

    for (i, text) in lines {
        let lineno = i + 1;
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Format { line: lineno, msg };
        let rec: Record = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        match rec {
            Record::Node { id, kind } => {
                if id.index() != kinds.len() {
                    return Err(bad(format!("node {id} out of order")));
                }
                kinds.push(kind);
                let len = if kind == NodeKind::Anchor { 1 } else { n_steps + 1 };
                positions.push(vec![None; len]);
            }
            Record::Pos { node, t, x, y } => {
                let slot = positions
                    .get_mut(node.index())
                    .and_then(|track| track.get_mut(t))
                    .ok_or_else(|| bad(format!("position for unknown node/step {node}@{t}")))?;
                *slot = Some(Position::new(x, y));
            }
            Record::Z { lo, hi, chain } => {
                let chain = chain
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(LosIndicator::Nlos),
                        '1' => Ok(LosIndicator::Los),
                        other => Err(bad(format!("bad chain symbol {other:?}"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                z_states.insert(PairKey::new(lo, hi), chain);
            }
            Record::Meas { t, k, m, theta } => {
                measurements
                    .get_mut(t)
                    .ok_or_else(|| bad(format!("measurement step {t} out of range")))?
                    .push(RangingMeasurement { t, k, m, theta });
            }
            Record::Ins { t, k, dx, dy } => {
                ins.get_mut(t)
                    .ok_or_else(|| bad(format!("inertial step {t} out of range")))?
                    .push(InsReading { t, k, dx, dy });
            }
        }
    }

    let positions = positions
        .into_iter()
        .enumerate()
        .map(|(i, track)| {
            track
                .into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::Format { line: 0, msg: format!("node {i} has missing positions") })
        })
        .collect::<Result<Vec<_>>>()?;
    let truth = GroundTruth::new(kinds, positions, z_states, n_steps)?;
    Ok(Scenario {
        config,
        truth,
        measurements,
        ins,
    })
}
