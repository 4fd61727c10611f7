//! Continuous 3D pheromone volume.
//!
//! The working volume is normalized to the unit cube: `x` is lateral
//! placement (maps to a feature slot at the input level), `y` is depth
//! (0 = input level, 1 = output level), `z` is the recurrent-depth
//! coordinate (discretized to a time-skip when a genome is built). The
//! volume stores strength-weighted pheromone points — the colony's shared
//! memory — plus fixed input/output anchors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A location in the unit cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    /// Build a point, rejecting non-finite coordinates and clamping into the
    /// unit cube.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::InputDomain(format!(
                "non-finite point coordinates ({x}, {y}, {z})"
            )));
        }
        Ok(Self::clamped(x, y, z))
    }

    /// Clamp finite coordinates into the unit cube.
    pub fn clamped(x: f64, y: f64, z: f64) -> Self {
        debug_assert!(x.is_finite() && y.is_finite() && z.is_finite());
        Self {
            x: x.clamp(0.0, 1.0),
            y: y.clamp(0.0, 1.0),
            z: z.clamp(0.0, 1.0),
        }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// A strength-weighted pheromone deposit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PheromonePoint {
    pub pos: Point3,
    pub strength: f64,
}

/// Static parameters of a colony's search volume.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceConfig {
    pub n_inputs: usize,
    pub n_outputs: usize,
    /// Time-skips 1..=max are mapped from the z coordinate.
    pub max_recurrent_depth: usize,
    /// Points whose strength falls below this are removed.
    pub strength_floor: f64,
    pub strength_max: f64,
    /// Strength seeded at every anchor of a fresh space.
    pub initial_strength: f64,
    /// Amount deposited at each path point when a candidate enters the population.
    pub deposit_amount: f64,
    /// Deposits within this distance of an existing point merge into it.
    pub merge_radius: f64,
}

impl SpaceConfig {
    pub fn new(n_inputs: usize, n_outputs: usize, max_recurrent_depth: usize) -> Self {
        Self {
            n_inputs,
            n_outputs,
            max_recurrent_depth,
            strength_floor: 0.05,
            strength_max: 10.0,
            initial_strength: 1.0,
            deposit_amount: 1.0,
            merge_radius: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_inputs < 1 {
            problems.push("n_inputs must be >= 1".to_string());
        }
        if self.n_outputs < 1 {
            problems.push("n_outputs must be >= 1".to_string());
        }
        if self.max_recurrent_depth < 1 {
            problems.push("max_recurrent_depth must be >= 1".to_string());
        }
        if !(self.strength_floor > 0.0) {
            problems.push("strength_floor must be > 0".to_string());
        }
        if !(self.strength_floor < self.initial_strength
            && self.initial_strength <= self.strength_max)
        {
            problems.push(format!(
                "need strength_floor < initial_strength <= strength_max, got {} / {} / {}",
                self.strength_floor, self.initial_strength, self.strength_max
            ));
        }
        if !(self.deposit_amount > 0.0) {
            problems.push("deposit_amount must be > 0".to_string());
        }
        if !(self.merge_radius >= 0.0) {
            problems.push("merge_radius must be >= 0".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    /// Fixed entry point for a feature at the input level.
    pub fn input_anchor(&self, feature_idx: usize) -> Result<Point3> {
        if feature_idx >= self.n_inputs {
            return Err(Error::InputDomain(format!(
                "input anchor index {feature_idx} out of range (n_inputs = {})",
                self.n_inputs
            )));
        }
        Ok(Point3 {
            x: (feature_idx as f64 + 0.5) / self.n_inputs as f64,
            y: 0.0,
            z: 0.0,
        })
    }

    /// Fixed exit point for an output slot at the output level.
    pub fn output_anchor(&self, output_idx: usize) -> Result<Point3> {
        if output_idx >= self.n_outputs {
            return Err(Error::InputDomain(format!(
                "output anchor index {output_idx} out of range (n_outputs = {})",
                self.n_outputs
            )));
        }
        Ok(Point3 {
            x: (output_idx as f64 + 0.5) / self.n_outputs as f64,
            y: 1.0,
            z: 0.0,
        })
    }
}

/// The pheromone point set over the unit cube.
///
/// Single-writer: one colony's generator mutates its own space; workers only
/// ever see immutable genomes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchSpace {
    config: SpaceConfig,
    points: Vec<PheromonePoint>,
}

impl SearchSpace {
    /// Fresh space, seeded with `initial_strength` at every anchor so
    /// generation-0 ants have nonzero signal.
    pub fn new(config: SpaceConfig) -> Result<Self> {
        config.validate()?;
        let mut space = Self {
            points: Vec::new(),
            config,
        };
        for i in 0..space.config.n_inputs {
            let pos = space.config.input_anchor(i)?;
            space.deposit(pos, space.config.initial_strength)?;
        }
        for o in 0..space.config.n_outputs {
            let pos = space.config.output_anchor(o)?;
            space.deposit(pos, space.config.initial_strength)?;
        }
        Ok(space)
    }

    pub fn config(&self) -> &SpaceConfig {
        &self.config
    }

    pub fn points(&self) -> &[PheromonePoint] {
        &self.points
    }

    /// Add pheromone at `pos`. Merges into the first existing point within
    /// `merge_radius` (strength clamped to the maximum, position moved to the
    /// strength-weighted mean); otherwise stores a new point.
    pub fn deposit(&mut self, pos: Point3, amount: f64) -> Result<()> {
        if !amount.is_finite() || amount <= 0.0 {
            return Err(Error::InputDomain(format!(
                "deposit amount must be finite and > 0, got {amount}"
            )));
        }
        if !(pos.x.is_finite() && pos.y.is_finite() && pos.z.is_finite()) {
            return Err(Error::InputDomain("non-finite deposit position".into()));
        }
        for p in &mut self.points {
            if p.pos.distance(&pos) <= self.config.merge_radius {
                let w1 = p.strength;
                let w2 = amount;
                p.pos = Point3::clamped(
                    (p.pos.x * w1 + pos.x * w2) / (w1 + w2),
                    (p.pos.y * w1 + pos.y * w2) / (w1 + w2),
                    (p.pos.z * w1 + pos.z * w2) / (w1 + w2),
                );
                p.strength = (p.strength + amount).min(self.config.strength_max);
                return Ok(());
            }
        }
        // A new point below the floor would be swept on the next evaporation
        // anyway; never store it.
        if amount >= self.config.strength_floor {
            self.points.push(PheromonePoint {
                pos,
                strength: amount.min(self.config.strength_max),
            });
        }
        Ok(())
    }

    /// Multiply every strength by the retention factor and drop points that
    /// fall below the floor.
    pub fn evaporate(&mut self, retention: f64) -> Result<()> {
        if !(retention > 0.0 && retention < 1.0) {
            return Err(Error::InputDomain(format!(
                "evaporation retention must lie in (0, 1), got {retention}"
            )));
        }
        for p in &mut self.points {
            p.strength *= retention;
        }
        let floor = self.config.strength_floor;
        self.points.retain(|p| p.strength >= floor);
        Ok(())
    }

    /// All pheromone points within `radius` of `center`, in insertion order.
    pub fn sense(&self, center: Point3, radius: f64) -> Vec<PheromonePoint> {
        debug_assert!(radius > 0.0);
        self.points
            .iter()
            .filter(|p| p.pos.distance(&center) <= radius)
            .copied()
            .collect()
    }

    /// Summed strength within `merge_radius` of `pos`; used to weight entry
    /// anchors.
    pub fn strength_near(&self, pos: Point3) -> f64 {
        self.points
            .iter()
            .filter(|p| p.pos.distance(&pos) <= self.config.merge_radius)
            .map(|p| p.strength)
            .sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.points.iter().map(|p| p.strength).sum()
    }

    /// Snapshot of the point set as a JSON document for debugging and replay.
    pub fn snapshot_json(&self) -> serde_json::Value {
        serde_json::json!(self
            .points
            .iter()
            .map(|p| {
                serde_json::json!({
                    "x": p.pos.x,
                    "y": p.pos.y,
                    "z": p.pos.z,
                    "strength": p.strength,
                })
            })
            .collect::<Vec<_>>())
    }
}
