//! Particle-swarm exchange of colony traits.
//!
//! Each colony's (num_ants, evaporation_rate, mortality_rate) triple is a
//! particle position in normalized [0,1]^3. Colonies report the position
//! they just ran with plus the best MSE of the finished window; the
//! environment role keeps personal bests and the asynchronous best-so-far
//! global best, and moves each particle with the canonical inertia-weight
//! velocity update.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::colony::ColonyParams;
use crate::error::{Error, Result};

/// Normalized trait position: (num_ants, evaporation, mortality).
pub type Position = [f64; 3];

/// Per-dimension trait bounds used by encode/decode.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraitBounds {
    pub num_ants: (f64, f64),
    pub evaporation: (f64, f64),
    pub mortality: (f64, f64),
}

impl Default for TraitBounds {
    fn default() -> Self {
        Self {
            num_ants: (10.0, 200.0),
            evaporation: (0.15, 0.95),
            mortality: (0.01, 0.1),
        }
    }
}

impl TraitBounds {
    fn lo(&self) -> [f64; 3] {
        [self.num_ants.0, self.evaporation.0, self.mortality.0]
    }

    fn hi(&self) -> [f64; 3] {
        [self.num_ants.1, self.evaporation.1, self.mortality.1]
    }

    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for (name, (lo, hi)) in [
            ("num_ants", self.num_ants),
            ("evaporation", self.evaporation),
            ("mortality", self.mortality),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                problems.push(format!("swarm bounds for {name} must satisfy lo < hi"));
            }
        }
        if self.num_ants.0 < 1.0 {
            problems.push("num_ants lower bound must be >= 1".to_string());
        }
        if self.evaporation.0 <= 0.0 || self.evaporation.1 >= 1.0 {
            problems.push("evaporation bounds must lie inside (0, 1)".to_string());
        }
        if self.mortality.0 < 0.0 || self.mortality.1 > 1.0 {
            problems.push("mortality bounds must lie inside [0, 1]".to_string());
        }
        problems
    }

    /// Pull raw params inside the bounds; applied to initial colony traits
    /// before their first exchange.
    pub fn clamp_params(&self, params: &ColonyParams) -> ColonyParams {
        ColonyParams {
            num_ants: (params.num_ants as f64)
                .clamp(self.num_ants.0, self.num_ants.1)
                .round() as usize,
            evaporation_rate: params.evaporation_rate.clamp(self.evaporation.0, self.evaporation.1),
            mortality_rate: params.mortality_rate.clamp(self.mortality.0, self.mortality.1),
        }
    }

    pub fn contains(&self, params: &ColonyParams) -> bool {
        let ants = params.num_ants as f64;
        ants >= self.num_ants.0
            && ants <= self.num_ants.1
            && params.evaporation_rate >= self.evaporation.0
            && params.evaporation_rate <= self.evaporation.1
            && params.mortality_rate >= self.mortality.0
            && params.mortality_rate <= self.mortality.1
    }
}

/// Swarm coefficients; the canonical stable-regime inertia-weight choice.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwarmConfig {
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub v_max: f64,
    pub bounds: TraitBounds,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            inertia: 0.7,
            cognitive: 1.5,
            social: 1.5,
            v_max: 0.2,
            bounds: TraitBounds::default(),
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = self.bounds.validate();
        if !(self.inertia > 0.0 && self.inertia < 1.0) {
            problems.push("swarm.inertia must lie in (0, 1)".to_string());
        }
        if !(self.cognitive > 0.0) {
            problems.push("swarm.cognitive must be > 0".to_string());
        }
        if !(self.social > 0.0) {
            problems.push("swarm.social must be > 0".to_string());
        }
        if !(self.v_max > 0.0) {
            problems.push("swarm.v_max must be > 0".to_string());
        }
        problems
    }
}

/// Map params onto the unit cube.
pub fn encode(params: &ColonyParams, bounds: &TraitBounds) -> Result<Position> {
    if !bounds.contains(params) {
        return Err(Error::InputDomain(format!(
            "params {params:?} outside swarm bounds"
        )));
    }
    let lo = bounds.lo();
    let hi = bounds.hi();
    let raw = [
        params.num_ants as f64,
        params.evaporation_rate,
        params.mortality_rate,
    ];
    let mut pos = [0.0; 3];
    for d in 0..3 {
        pos[d] = (raw[d] - lo[d]) / (hi[d] - lo[d]);
    }
    Ok(pos)
}

/// Inverse of [`encode`]; the ant count rounds to the nearest integer.
pub fn decode(position: Position, bounds: &TraitBounds) -> ColonyParams {
    let lo = bounds.lo();
    let hi = bounds.hi();
    let at = |d: usize| lo[d] + position[d].clamp(0.0, 1.0) * (hi[d] - lo[d]);
    ColonyParams {
        num_ants: at(0).round() as usize,
        evaporation_rate: at(1),
        mortality_rate: at(2),
    }
}

/// One colony's particle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Particle {
    pub position: Position,
    pub velocity: [f64; 3],
    pub pbest_position: Position,
    pub pbest_fitness: f64,
}

impl Particle {
    pub fn new(position: Position) -> Self {
        Self {
            position,
            velocity: [0.0; 3],
            pbest_position: position,
            pbest_fitness: f64::INFINITY,
        }
    }
}

/// Canonical velocity/position update toward personal and global bests.
///
/// Draws r1 then r2 per dimension, clamps velocity to +-v_max and position
/// into the unit cube.
pub fn update_particle<R: Rng>(
    particle: &mut Particle,
    gbest_position: Position,
    cfg: &SwarmConfig,
    rng: &mut R,
) {
    for d in 0..3 {
        let r1 = rng.gen::<f64>();
        let r2 = rng.gen::<f64>();
        let v = cfg.inertia * particle.velocity[d]
            + cfg.cognitive * r1 * (particle.pbest_position[d] - particle.position[d])
            + cfg.social * r2 * (gbest_position[d] - particle.position[d]);
        particle.velocity[d] = v.clamp(-cfg.v_max, cfg.v_max);
        particle.position[d] = (particle.position[d] + particle.velocity[d]).clamp(0.0, 1.0);
    }
}

/// The full swarm, held by the environment role.
#[derive(Debug, Clone)]
pub struct Swarm {
    cfg: SwarmConfig,
    particles: Vec<Particle>,
    gbest_position: Option<Position>,
    gbest_fitness: f64,
}

impl Swarm {
    pub fn new(cfg: SwarmConfig, initial_positions: Vec<Position>) -> Self {
        Self {
            cfg,
            particles: initial_positions.into_iter().map(Particle::new).collect(),
            gbest_position: None,
            gbest_fitness: f64::INFINITY,
        }
    }

    pub fn config(&self) -> &SwarmConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particle(&self, id: usize) -> &Particle {
        &self.particles[id]
    }

    pub fn gbest(&self) -> Option<(Position, f64)> {
        self.gbest_position.map(|p| (p, self.gbest_fitness))
    }

    /// Record a colony's (position, window-best fitness) sample. Ties keep
    /// the incumbent; non-finite fitness is ignored with a log record.
    pub fn report(&mut self, id: usize, position: Position, fitness: f64) -> Result<()> {
        if id >= self.particles.len() {
            return Err(Error::Protocol(format!("report from unknown colony {id}")));
        }
        if !fitness.is_finite() {
            log::warn!("swarm: ignoring non-finite fitness report from colony {id}");
            return Ok(());
        }
        let particle = &mut self.particles[id];
        particle.position = position;
        if fitness < particle.pbest_fitness {
            particle.pbest_fitness = fitness;
            particle.pbest_position = position;
        }
        if fitness < self.gbest_fitness {
            self.gbest_fitness = fitness;
            self.gbest_position = Some(position);
        }
        Ok(())
    }

    /// Advance one particle toward its personal best and the global best;
    /// returns the new position. Before any finite report the particle's own
    /// best stands in for the global one.
    pub fn advance<R: Rng>(&mut self, id: usize, rng: &mut R) -> Result<Position> {
        if id >= self.particles.len() {
            return Err(Error::Protocol(format!("advance for unknown colony {id}")));
        }
        let gbest = self
            .gbest_position
            .unwrap_or(self.particles[id].pbest_position);
        update_particle(&mut self.particles[id], gbest, &self.cfg, rng);
        Ok(self.particles[id].position)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(ants: usize, evap: f64, mort: f64) -> ColonyParams {
        ColonyParams {
            num_ants: ants,
            evaporation_rate: evap,
            mortality_rate: mort,
        }
    }

    #[test]
    fn encode_maps_bounds_to_unit_corners() {
        let b = TraitBounds::default();
        assert_eq!(encode(&params(10, 0.15, 0.01), &b).unwrap(), [0.0, 0.0, 0.0]);
        assert_eq!(encode(&params(200, 0.95, 0.1), &b).unwrap(), [1.0, 1.0, 1.0]);
        let mid = encode(&params(105, 0.55, 0.055), &b).unwrap();
        for d in 0..3 {
            assert!((mid[d] - 0.5).abs() < 1e-12, "dim {d}: {}", mid[d]);
        }
    }

    #[test]
    fn encode_rejects_out_of_bounds() {
        let b = TraitBounds::default();
        assert!(encode(&params(5, 0.9, 0.1), &b).is_err());
        assert!(encode(&params(50, 0.99, 0.05), &b).is_err());
    }

    #[test]
    fn decode_maps_corners_to_bounds() {
        let b = TraitBounds::default();
        assert_eq!(decode([0.0, 0.0, 0.0], &b), params(10, 0.15, 0.01));
        assert_eq!(decode([1.0, 1.0, 1.0], &b), params(200, 0.95, 0.1));
        let mid = decode([0.5, 0.5, 0.5], &b);
        assert_eq!(mid.num_ants, 105);
        assert!((mid.evaporation_rate - 0.55).abs() < 1e-12);
        assert!((mid.mortality_rate - 0.055).abs() < 1e-12);
    }

    #[test]
    fn update_is_a_fixed_point_at_a_shared_best() {
        let cfg = SwarmConfig::default();
        let mut p = Particle::new([0.4, 0.6, 0.2]);
        p.pbest_position = p.position;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        update_particle(&mut p, [0.4, 0.6, 0.2], &cfg, &mut rng);
        assert_eq!(p.position, [0.4, 0.6, 0.2]);
        assert_eq!(p.velocity, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn update_pure_inertia_translates_position() {
        let cfg = SwarmConfig {
            inertia: 1.0 - 1e-12, // validation requires (0,1); this is as close as it gets
            cognitive: 1e-300,
            social: 1e-300,
            ..SwarmConfig::default()
        };
        let mut p = Particle::new([0.5, 0.5, 0.5]);
        p.velocity = [0.1, 0.0, 0.0];
        p.pbest_position = p.position;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        update_particle(&mut p, [0.5, 0.5, 0.5], &cfg, &mut rng);
        assert!((p.position[0] - 0.6).abs() < 1e-9);
        assert_eq!(p.position[1], 0.5);
        assert_eq!(p.position[2], 0.5);
    }

    #[test]
    fn report_updates_personal_and_global_bests() {
        let mut swarm = Swarm::new(SwarmConfig::default(), vec![[0.1; 3], [0.9; 3]]);
        assert!(swarm.gbest().is_none());

        swarm.report(0, [0.2; 3], 0.3).unwrap();
        assert_eq!(swarm.gbest().unwrap().1, 0.3);
        assert_eq!(swarm.particle(0).pbest_fitness, 0.3);

        // Worse report changes nothing.
        swarm.report(0, [0.25; 3], 0.5).unwrap();
        assert_eq!(swarm.particle(0).pbest_fitness, 0.3);
        assert_eq!(swarm.gbest().unwrap().1, 0.3);

        // Better report from another colony takes the global best.
        swarm.report(1, [0.8; 3], 0.1).unwrap();
        assert_eq!(swarm.gbest().unwrap().1, 0.1);
        assert_eq!(swarm.gbest().unwrap().0, [0.8; 3]);
    }

    #[test]
    fn report_ignores_non_finite_and_rejects_unknown_ids() {
        let mut swarm = Swarm::new(SwarmConfig::default(), vec![[0.1; 3]]);
        swarm.report(0, [0.2; 3], f64::INFINITY).unwrap();
        assert!(swarm.gbest().is_none());
        assert!(swarm.report(3, [0.2; 3], 0.1).is_err());
    }

    #[test]
    fn sphere_benchmark_converges_for_most_seeds() {
        // Shifted sphere on the unit cube; 20 particles, 200 iterations.
        let optimum = [0.3, 0.6, 0.2];
        let sphere = |p: &Position| -> f64 {
            p.iter()
                .zip(optimum.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        };
        let mut successes = 0;
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let init: Vec<Position> = (0..20)
                .map(|_| [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()])
                .collect();
            let mut swarm = Swarm::new(SwarmConfig::default(), init);
            let mut done_at = None;
            'outer: for iter in 0..200 {
                for i in 0..swarm.len() {
                    let fit = sphere(&swarm.particle(i).position);
                    swarm.report(i, swarm.particle(i).position, fit).unwrap();
                    swarm.advance(i, &mut rng).unwrap();
                }
                if swarm.gbest().unwrap().1 < 1e-3 {
                    done_at = Some(iter);
                    break 'outer;
                }
            }
            if done_at.is_some() {
                successes += 1;
            }
        }
        assert!(successes >= 9, "only {successes}/10 seeds converged");
    }

    proptest! {
        #[test]
        fn gbest_is_monotone_and_bounds_every_pbest(
            reports in prop::collection::vec((0..4usize, 0.0..10.0f64), 1..60),
        ) {
            let mut swarm = Swarm::new(
                SwarmConfig::default(),
                vec![[0.5; 3], [0.2; 3], [0.8; 3], [0.4; 3]],
            );
            let mut last_gbest = f64::INFINITY;
            for (id, fitness) in reports {
                swarm.report(id, swarm.particle(id).position, fitness).unwrap();
                let g = swarm.gbest().map(|(_, f)| f).unwrap_or(f64::INFINITY);
                prop_assert!(g <= last_gbest);
                last_gbest = g;
                for i in 0..swarm.len() {
                    prop_assert!(g <= swarm.particle(i).pbest_fitness);
                }
            }
        }

        #[test]
        fn update_keeps_position_and_velocity_in_range(
            seed in 0..10_000u64,
            px in 0.0..=1.0f64, py in 0.0..=1.0f64, pz in 0.0..=1.0f64,
            vx in -0.2..=0.2f64, vy in -0.2..=0.2f64, vz in -0.2..=0.2f64,
            bx in 0.0..=1.0f64, by in 0.0..=1.0f64, bz in 0.0..=1.0f64,
            gx in 0.0..=1.0f64, gy in 0.0..=1.0f64, gz in 0.0..=1.0f64,
        ) {
            let cfg = SwarmConfig::default();
            let mut p = Particle::new([px, py, pz]);
            p.velocity = [vx, vy, vz];
            p.pbest_position = [bx, by, bz];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            update_particle(&mut p, [gx, gy, gz], &cfg, &mut rng);
            for d in 0..3 {
                prop_assert!((0.0..=1.0).contains(&p.position[d]));
                prop_assert!(p.velocity[d].abs() <= cfg.v_max + 1e-15);
            }
        }

        #[test]
        fn encode_decode_roundtrip_for_integer_valid_params(
            ants in 10..=200usize,
            evap in 0.15..=0.95f64,
            mort in 0.01..=0.1f64,
        ) {
            let b = TraitBounds::default();
            let p = params(ants, evap, mort);
            let back = decode(encode(&p, &b).unwrap(), &b);
            prop_assert_eq!(back.num_ants, p.num_ants);
            prop_assert!((back.evaporation_rate - p.evaporation_rate).abs() < 1e-12);
            prop_assert!((back.mortality_rate - p.mortality_rate).abs() < 1e-12);
        }
    }
}
