use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{substream, Purpose};
use crate::types::{NodeId, Position};

/// A node's per-step announcement: its estimate (mobile) or its surveyed
/// position (anchor), with its smoothed per-step displacement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BroadcastMessage {
    pub sender: NodeId,
    pub t: usize,
    pub payload: Position,
    /// Zero for anchors.
    #[serde(default)]
    pub velocity: Position,
}

impl BroadcastMessage {
    /// Payload carried forward to step `t` at the announced velocity.
    pub fn extrapolate(&self, t: usize) -> Position {
        let age = t.saturating_sub(self.t) as f64;
        Position::new(self.payload.x + age * self.velocity.x, self.payload.y + age * self.velocity.y)
    }
}

/// Broadcast medium between epochs.
pub trait Transport: Send {
    /// Queue a message produced at step `msg.t`.
    fn broadcast(&mut self, msg: BroadcastMessage);

    /// Messages that become visible at the start of step `t`.
    fn collect(&mut self, t: usize) -> Vec<BroadcastMessage>;
}

/// Loss and delay applied by [`InProcessBus`]. The default is a lossless,
/// instantaneous channel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelHooks {
    pub loss_probability: f64,
    /// Extra steps between sending and delivery.
    pub delay_steps: usize,
}

/// In-memory broadcast medium. A message sent at step `t` is delivered at
/// `t + 1 + delay_steps` unless dropped.
#[derive(Debug)]
pub struct InProcessBus {
    hooks: ChannelHooks,
    seed: u64,
    queue: Vec<(usize, BroadcastMessage)>,
}

impl InProcessBus {
    pub fn new(hooks: ChannelHooks, seed: u64) -> Self {
        InProcessBus {
            hooks,
            seed,
            queue: Vec::new(),
        }
    }
}

impl Transport for InProcessBus {
    fn broadcast(&mut self, msg: BroadcastMessage) {
        if self.hooks.loss_probability > 0.0 {
            let mut rng = substream(self.seed, Purpose::Transport, u64::from(msg.sender.0), msg.t as u64);
            if rng.random::<f64>() < self.hooks.loss_probability {
                return;
            }
        }
        self.queue.push((msg.t + 1 + self.hooks.delay_steps, msg));
    }

    fn collect(&mut self, t: usize) -> Vec<BroadcastMessage> {
        let mut due = Vec::new();
        self.queue.retain(|(at, msg)| {
            if *at <= t {
                due.push(*msg);
                false
            } else {
                true
            }
        });
        due.sort_by_key(|m| (m.t, m.sender));
        due
    }
}
