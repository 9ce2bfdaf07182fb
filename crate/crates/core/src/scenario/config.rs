use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LosTransition, MixtureParams};
use crate::types::Position;

/// Placement of the static anchors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AnchorLayout {
    /// Two horizontal rows of evenly spaced anchors at `y = inset` and
    /// `y = grid_height - inset`, the first row taking the odd anchor.
    TwoRows {
        #[serde(default)]
        inset: f64,
    },
    /// `rows` evenly spaced rows, anchors centred in their cells.
    Grid { rows: usize },
    Explicit { positions: Vec<Position> },
}

impl Default for AnchorLayout {
    fn default() -> Self {
        AnchorLayout::TwoRows { inset: 0.0 }
    }
}

impl AnchorLayout {
    pub fn place(&self, count: usize, width: f64, height: f64) -> Result<Vec<Position>> {
        match self {
            AnchorLayout::TwoRows { inset } => {
                let bottom = count.div_ceil(2);
                let top = count - bottom;
                let mut out = Vec::with_capacity(count);
                for (n, y) in [(bottom, *inset), (top, height - inset)] {
                    out.extend(spread(n, width).map(|x| Position::new(x, y)));
                }
                Ok(out)
            }
            AnchorLayout::Grid { rows } => {
                if *rows == 0 {
                    return Err(Error::config("grid anchor layout needs at least one row"));
                }
                let per_row = count.div_ceil(*rows);
                let mut out = Vec::with_capacity(count);
                'rows: for r in 0..*rows {
                    let y = height * (r as f64 + 0.5) / *rows as f64;
                    for c in 0..per_row {
                        if out.len() == count {
                            break 'rows;
                        }
                        let x = width * (c as f64 + 0.5) / per_row as f64;
                        out.push(Position::new(x, y));
                    }
                }
                Ok(out)
            }
            AnchorLayout::Explicit { positions } => {
                if positions.len() != count {
                    return Err(Error::config(format!(
                        "explicit anchor layout lists {} positions but n_anchor = {count}",
                        positions.len()
                    )));
                }
                Ok(positions.clone())
            }
        }
    }
}

/// `n` evenly spaced abscissae covering `[0, width]` end to end.
fn spread(n: usize, width: f64) -> impl Iterator<Item = f64> {
    (0..n).map(move |j| if n == 1 { width / 2.0 } else { width * j as f64 / (n - 1) as f64 })
}

/// Everything needed to synthesize one experiment's ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_mobile: usize,
    pub n_anchor: usize,
    pub grid_width: f64,
    pub grid_height: f64,
    pub comm_radius: f64,
    pub velocity_per_step: f64,
    pub n_steps: usize,
    pub params: MixtureParams,
    /// NLOS → LOS probability per step; `alpha / 2` when absent.
    pub p01: Option<f64>,
    pub curve_amplitude: f64,
    pub curve_period: f64,
    /// Mobile nodes start uniformly in the leftmost `start_fraction` of the grid.
    pub start_fraction: f64,
    pub anchor_layout: AnchorLayout,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_mobile: 20,
            n_anchor: 26,
            grid_width: 150.0,
            grid_height: 30.0,
            comm_radius: 10.0,
            velocity_per_step: 0.2,
            n_steps: 750,
            params: MixtureParams::default(),
            p01: None,
            curve_amplitude: 2.0,
            curve_period: 200.0,
            start_fraction: 0.05,
            anchor_layout: AnchorLayout::default(),
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grid_width", self.grid_width),
            ("grid_height", self.grid_height),
            ("comm_radius", self.comm_radius),
            ("curve_period", self.curve_period),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_steps < 1 {
            return Err(Error::config("n_steps must be at least 1"));
        }
        if !self.velocity_per_step.is_finite() || !self.curve_amplitude.is_finite() {
            return Err(Error::config("velocity and curve amplitude must be finite"));
        }
        if !(0.0..=1.0).contains(&self.start_fraction) {
            return Err(Error::config("start_fraction must lie in [0, 1]"));
        }
        if self.n_mobile + self.n_anchor > u32::MAX as usize {
            return Err(Error::config("too many nodes"));
        }
        self.transition()?;
        self.anchor_layout
            .place(self.n_anchor, self.grid_width, self.grid_height)?;
        Ok(())
    }

    pub fn p01(&self) -> f64 {
        self.p01.unwrap_or(self.params.alpha() / 2.0)
    }

    pub fn transition(&self) -> Result<LosTransition> {
        LosTransition::from_alpha(self.params.alpha(), self.p01())
    }

    pub fn n_nodes(&self) -> usize {
        self.n_mobile + self.n_anchor
    }
}
