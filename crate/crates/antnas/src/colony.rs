//! One colony: its space, ant roster, parameters, and elite population.
//!
//! A generation sends every ant foraging, clusters the paths into a
//! candidate genome, and hands it off for evaluation. When a result beats
//! the weakest population member the candidate replaces it and its paths
//! are rewarded with pheromone; each generation ends with evaporation and
//! ant mortality.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ants::{self, AntTraits};
use crate::error::{Error, Result};
use crate::genome::{build_genome, Genome};
use crate::pso::TraitBounds;
use crate::space::{SearchSpace, SpaceConfig};

/// The three colony-level traits exchanged through the swarm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColonyParams {
    pub num_ants: usize,
    pub evaporation_rate: f64,
    pub mortality_rate: f64,
}

impl ColonyParams {
    /// Sanity required to run a colony at all; the swarm's trait bounds are
    /// stricter and only enforced from the first exchange onward.
    pub fn validate_operational(&self) -> Result<()> {
        if self.num_ants < 1 {
            return Err(Error::InputDomain("num_ants must be >= 1".into()));
        }
        if !(self.evaporation_rate > 0.0 && self.evaporation_rate < 1.0) {
            return Err(Error::InputDomain(format!(
                "evaporation_rate must lie in (0, 1), got {}",
                self.evaporation_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.mortality_rate) {
            return Err(Error::InputDomain(format!(
                "mortality_rate must lie in [0, 1], got {}",
                self.mortality_rate
            )));
        }
        Ok(())
    }
}

/// A trained candidate retained in the elite set.
#[derive(Debug, Clone)]
pub struct PopulationMember {
    pub genome: Genome,
    pub fitness: f64,
    pub trained_weights: Vec<f64>,
}

/// Bounded elite set ordered by ascending validation MSE.
#[derive(Debug, Clone)]
pub struct Population {
    capacity: usize,
    members: Vec<PopulationMember>,
}

impl Population {
    pub fn new(capacity: usize) -> Self {
        debug_assert!(capacity >= 1);
        Self {
            capacity,
            members: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[PopulationMember] {
        &self.members
    }

    pub fn best(&self) -> Option<&PopulationMember> {
        self.members.first()
    }

    pub fn best_fitness(&self) -> f64 {
        self.members.first().map_or(f64::INFINITY, |m| m.fitness)
    }

    /// Replace-worst insertion. On success the candidate's provenance paths
    /// are rewarded with `deposit_amount` pheromone at every point.
    pub fn try_insert(
        &mut self,
        genome: Genome,
        fitness: f64,
        trained_weights: Vec<f64>,
        space: &mut SearchSpace,
        deposit_amount: f64,
    ) -> Result<bool> {
        if !fitness.is_finite() {
            log::debug!("population: rejecting non-finite fitness candidate");
            return Ok(false);
        }
        if self.members.len() >= self.capacity {
            let worst = self.members.last().expect("capacity >= 1").fitness;
            if fitness >= worst {
                return Ok(false);
            }
            self.members.pop();
        }
        for path in &genome.provenance_paths {
            for p in &path.points {
                space.deposit(*p, deposit_amount)?;
            }
        }
        // Ties keep earlier arrivals ahead.
        let at = self.members.partition_point(|m| m.fitness <= fitness);
        self.members.insert(
            at,
            PopulationMember {
                genome,
                fitness,
                trained_weights,
            },
        );
        Ok(true)
    }
}

/// A colony's complete mutable state, driven by its generator loop.
#[derive(Debug)]
pub struct Colony {
    id: usize,
    params: ColonyParams,
    space: SearchSpace,
    ants: Vec<AntTraits>,
    population: Population,
    rng: ChaCha8Rng,
    generation: u64,
    cluster_radius: f64,
    degenerate_retry_cap: usize,
}

impl Colony {
    pub fn new(
        id: usize,
        params: ColonyParams,
        space_config: SpaceConfig,
        cluster_radius: f64,
        population_capacity: usize,
        seed: u64,
    ) -> Result<Self> {
        params.validate_operational()?;
        if !(cluster_radius > 0.0) {
            return Err(Error::InputDomain("cluster_radius must be > 0".into()));
        }
        let space = SearchSpace::new(space_config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ants = (0..params.num_ants)
            .map(|_| ants::spawn_ant(&mut rng))
            .collect();
        Ok(Self {
            id,
            params,
            space,
            ants,
            population: Population::new(population_capacity),
            rng,
            generation: 0,
            cluster_radius,
            degenerate_retry_cap: 5,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn params(&self) -> ColonyParams {
        self.params
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    pub fn ants(&self) -> &[AntTraits] {
        &self.ants
    }

    /// Send the whole roster foraging and cluster the paths into a genome,
    /// retrying with fresh walks when the result is degenerate.
    pub fn generate_candidate(&mut self) -> Result<Genome> {
        let cfg = self.space.config();
        let (n_inputs, n_outputs, max_depth) =
            (cfg.n_inputs, cfg.n_outputs, cfg.max_recurrent_depth);
        for _attempt in 0..self.degenerate_retry_cap {
            let mut paths = Vec::with_capacity(self.ants.len());
            for ant in &self.ants {
                paths.push(ants::forage(ant, &self.space, &mut self.rng, n_inputs, n_outputs)?);
            }
            match build_genome(paths, self.cluster_radius, n_inputs, n_outputs, max_depth) {
                Ok(genome) => return Ok(genome),
                Err(Error::DegenerateGenome(_)) => continue,
                Err(other) => return Err(other),
            }
        }
        Err(Error::ColonyExhausted {
            colony_id: self.id,
            attempts: self.degenerate_retry_cap,
        })
    }

    /// Insert an evaluated candidate; rewards its paths on success.
    pub fn record_result(
        &mut self,
        genome: Genome,
        fitness: f64,
        trained_weights: Vec<f64>,
    ) -> Result<bool> {
        let amount = self.space.config().deposit_amount;
        self.population
            .try_insert(genome, fitness, trained_weights, &mut self.space, amount)
    }

    /// Evaporate, apply mortality, bump the generation counter.
    pub fn end_of_generation(&mut self) -> Result<()> {
        self.space.evaporate(self.params.evaporation_rate)?;
        ants::apply_mortality(&mut self.ants, self.params.mortality_rate, &mut self.rng)?;
        self.generation += 1;
        Ok(())
    }

    /// Adopt swarm-decoded traits. The roster grows by spawning and shrinks
    /// newest-first, so long-lived ants survive resizes.
    pub fn apply_params(&mut self, params: ColonyParams, bounds: &TraitBounds) -> Result<()> {
        if !bounds.contains(&params) {
            return Err(Error::InputDomain(format!(
                "params {params:?} outside swarm bounds"
            )));
        }
        params.validate_operational()?;
        self.params = params;
        while self.ants.len() < params.num_ants {
            self.ants.push(ants::spawn_ant(&mut self.rng));
        }
        self.ants.truncate(params.num_ants);
        Ok(())
    }
}
