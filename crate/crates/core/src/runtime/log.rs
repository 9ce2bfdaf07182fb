//! Epoch logs and their line-delimited file form.
//!
//! A log file starts with a header line
//! `{"format":"p2ploc-epoch-log","version":1,"seed":…,"estimators":[…]}`
//! followed by one `{"rec":"node",…}` line per node per step and one
//! `{"rec":"epoch",…}` line closing each step.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LosIndicator;
use crate::types::{NodeId, NodeKind, Position};

pub const LOG_FORMAT: &str = "p2ploc-epoch-log";
pub const LOG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    ParticleFilter,
    GenieMl,
    Ransac,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::ParticleFilter, Estimator::GenieMl, Estimator::Ransac];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::ParticleFilter => "particle-filter",
            Estimator::GenieMl => "genie-ml",
            Estimator::Ransac => "ransac",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::config(format!("unknown estimator {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkRecord {
    pub neighbor: NodeId,
    pub theta: f64,
    pub true_z: LosIndicator,
    /// Particle-filter decision; absent when no broadcast from the neighbor was available.
    pub detected_z: Option<LosIndicator>,
    /// Step at which the neighbor estimate used for this reading was produced.
    pub est_step: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub t: usize,
    pub id: NodeId,
    pub kind: NodeKind,
    pub truth: Position,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub estimates: BTreeMap<Estimator, Position>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub errors: BTreeMap<Estimator, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<LinkRecord>,
}

impl NodeRecord {
    pub fn set_estimate(&mut self, estimator: Estimator, p: Position) {
        self.estimates.insert(estimator, p);
        self.errors.insert(estimator, p.distance(&self.truth));
    }

    pub fn error(&self, estimator: Estimator) -> Option<f64> {
        self.errors.get(&estimator).copied()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub t: usize,
    pub records: Vec<NodeRecord>,
    pub measurement_count: usize,
    /// Nodes whose filter was redrawn after losing particle diversity.
    pub resets: Vec<NodeId>,
    /// Nodes whose weights all vanished; these were reset as well.
    pub degenerate: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
}

impl LogHeader {
    pub fn new(seed: u64, estimators: Vec<Estimator>) -> Self {
        LogHeader {
            format: LOG_FORMAT.into(),
            version: LOG_VERSION,
            seed,
            estimators,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "rec", rename_all = "lowercase")]
enum LogLine {
    Node(NodeRecord),
    Epoch {
        t: usize,
        measurements: usize,
        #[serde(default)]
        resets: Vec<NodeId>,
        #[serde(default)]
        degenerate: Vec<NodeId>,
    },
}

pub fn write_log<W: Write>(header: &LogHeader, logs: &[EpochLog], mut w: W) -> Result<()> {
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for epoch in logs {
        for r in &epoch.records {
            serde_json::to_writer(&mut w, &LogLine::Node(r.clone()))?;
            w.write_all(b"\n")?;
        }
        let close = LogLine::Epoch {
            t: epoch.t,
            measurements: epoch.measurement_count,
            resets: epoch.resets.clone(),
            degenerate: epoch.degenerate.clone(),
        };
        serde_json::to_writer(&mut w, &close)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_log<R: BufRead>(r: R) -> Result<(LogHeader, Vec<EpochLog>)> {
    let mut lines = r.lines();
    let first = lines
        .next()
        .ok_or(Error::Format { line: 1, msg: "empty log file".into() })??;
    let header: LogHeader = serde_json::from_str(&first).map_err(|e| Error::Format { line: 1, msg: e.to_string() })?;
    if header.format != LOG_FORMAT || header.version != LOG_VERSION {
        return Err(Error::Format {
            line: 1,
            msg: format!("unsupported format {} v{}", header.format, header.version),
        });
    }
    let mut logs = Vec::new();
    let mut pending = Vec::new();
    for (i, text) in lines.enumerate() {
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        let line: LogLine = serde_json::from_str(&text).map_err(|e| Error::Format { line: i + 2, msg: e.to_string() })?;
        match line {
            LogLine::Node(r) => pending.push(r),
            LogLine::Epoch { t, measurements, resets, degenerate } => {
                if pending.iter().any(|r| r.t != t) {
                    return Err(Error::Format { line: i + 2, msg: format!("records of another step inside epoch {t}") });
                }
                logs.push(EpochLog {
                    t,
                    records: std::mem::take(&mut pending),
                    measurement_count: measurements,
                    resets,
                    degenerate,
                });
            }
        }
    }
    if !pending.is_empty() {
        return Err(Error::Format { line: 0, msg: "log ends inside an epoch".into() });
    }
    Ok((header, logs))
}
