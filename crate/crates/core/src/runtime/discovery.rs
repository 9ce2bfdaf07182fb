use std::collections::HashMap;

use crate::types::{NodeId, PairKey, Position};

/// All unordered pairs strictly closer than `radius`, sorted.
///
/// Nodes are bucketed into square cells of side `radius`; only the 3×3 block
/// of cells around each node can hold a neighbor.
pub fn neighbor_discovery(positions: &[Position], radius: f64) -> Vec<PairKey> {
    let cell_of = |p: &Position| ((p.x / radius).floor() as i64, (p.y / radius).floor() as i64);
    let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in positions.iter().enumerate() {
        cells.entry(cell_of(p)).or_default().push(i);
    }
    let mut pairs = Vec::new();
    for (i, p) in positions.iter().enumerate() {
        let (cx, cy) = cell_of(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(bucket) = cells.get(&(cx + dx, cy + dy)) else {
                    continue;
                };
                for &j in bucket {
                    if j > i && p.distance(&positions[j]) < radius {
                        pairs.push(PairKey::new(NodeId(i as u32), NodeId(j as u32)));
                    }
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_radius() {
        let pts = [Position::new(0.0, 0.0), Position::new(0.0, 5.0), Position::new(0.0, 15.0)];
        let pairs = neighbor_discovery(&pts, 10.0);
        // (0,1) at 5 m and (1,2) at exactly 10 m
        assert_eq!(pairs, vec![PairKey::new(NodeId(0), NodeId(1))]);
    }

    #[test]
    fn no_self_pairs_for_coincident_nodes() {
        let pts = [Position::new(1.0, 1.0), Position::new(1.0, 1.0)];
        let pairs = neighbor_discovery(&pts, 1.0);
        assert_eq!(pairs, vec![PairKey::new(NodeId(0), NodeId(1))]);
    }
}
