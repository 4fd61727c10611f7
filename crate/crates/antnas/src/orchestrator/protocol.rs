//! Role logic shared by both execution modes.
//!
//! The generator (colony), worker, and environment roles communicate only
//! through [`Message`] values over FIFO mailboxes. The drivers here hold all
//! per-role state and bookkeeping; the execution modes differ only in how
//! messages move and threads interleave, so protocol semantics stay
//! identical.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::colony::{Colony, ColonyParams};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::genome::Genome;
use crate::nn::{self, TrainConfig};
use crate::pso::{decode, encode, Position, Swarm, TraitBounds};

pub const SEED_TAG_COLONY: u64 = 1;
pub const SEED_TAG_TRAIN: u64 = 2;
pub const SEED_TAG_PSO: u64 = 3;
pub const SEED_TAG_DATA: u64 = 4;

/// Everything that crosses a role boundary.
#[derive(Debug, Clone)]
pub enum Message {
    EvalRequest {
        colony_id: usize,
        candidate_seq: u64,
        genome: Genome,
    },
    EvalResult {
        colony_id: usize,
        candidate_seq: u64,
        fitness: f64,
        trained_weights: Vec<f64>,
    },
    PsoReport {
        colony_id: usize,
        exchange_idx: u64,
        position: Position,
        window_best_fitness: f64,
    },
    /// Sent to every colony after each report. `colony_position` is the
    /// recipient's current particle position; `ack` names the report this
    /// broadcast answers, so the reporter knows its particle has moved.
    PsoBroadcast {
        gbest_position: Position,
        colony_position: Position,
        ack: Option<(usize, u64)>,
    },
    ColonyDone {
        colony_id: usize,
    },
    Shutdown,
}

/// Immutable per-experiment training context shared by all workers.
#[derive(Debug)]
pub struct EvalContext {
    pub inputs: Arc<Vec<Vec<f64>>>,
    pub targets: Arc<Vec<Vec<f64>>>,
    pub train_config: TrainConfig,
    pub master_seed: u64,
}

/// Train one candidate. Any training failure comes back as the rejection
/// sentinel rather than an error so the pipeline keeps flowing.
pub fn evaluate_candidate(
    ctx: &EvalContext,
    colony_id: usize,
    candidate_seq: u64,
    genome: &Genome,
) -> Message {
    let seed = derive_seed(
        derive_seed(ctx.master_seed, SEED_TAG_TRAIN, colony_id as u64),
        0,
        candidate_seq,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outcome = nn::compile(genome, ctx.train_config.weight_init_scale, &mut rng)
        .and_then(|graph| nn::train_bptt(&graph, &ctx.inputs, &ctx.targets, &ctx.train_config));
    match outcome {
        Ok(out) => Message::EvalResult {
            colony_id,
            candidate_seq,
            fitness: out.validation_mse,
            trained_weights: out.weights,
        },
        Err(e) => {
            log::warn!("worker: candidate {candidate_seq} of colony {colony_id} failed: {e}");
            Message::EvalResult {
                colony_id,
                candidate_seq,
                fitness: f64::INFINITY,
                trained_weights: Vec::new(),
            }
        }
    }
}

/// A params change applied at an exchange boundary.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ParamChange {
    pub generation: u64,
    pub params: ColonyParams,
}

/// Final accounting for one colony.
#[derive(Debug)]
pub struct ColonySummary {
    pub colony_id: usize,
    pub best: Option<(Genome, Vec<f64>, f64)>,
    pub requests_sent: u64,
    pub results_received: u64,
    pub lost_in_flight: u64,
    pub exchanges: u64,
    pub final_params: ColonyParams,
    pub param_changes: Vec<ParamChange>,
    /// Population best after each generation, `f64::INFINITY` before the
    /// first insertion.
    pub fitness_per_generation: Vec<f64>,
}

/// Generator-role state machine, driven by either execution mode.
pub struct ColonyDriver {
    colony: Colony,
    bounds: TraitBounds,
    generations_per_colony: u64,
    exchange_interval: u64,
    pso_exchange: bool,
    in_flight_cap: usize,
    candidate_seq: u64,
    pending: BTreeMap<u64, Genome>,
    requests_sent: u64,
    results_received: u64,
    window_best: f64,
    exchanges_sent: u64,
    awaiting_ack: Option<u64>,
    last_gbest: Option<Position>,
    param_changes: Vec<ParamChange>,
    fitness_per_generation: Vec<f64>,
}

impl ColonyDriver {
    pub fn new(
        colony: Colony,
        bounds: TraitBounds,
        generations_per_colony: u64,
        exchange_interval: u64,
        pso_exchange: bool,
        in_flight_cap: usize,
    ) -> Self {
        Self {
            colony,
            bounds,
            generations_per_colony,
            exchange_interval,
            pso_exchange,
            in_flight_cap: in_flight_cap.max(1),
            candidate_seq: 0,
            pending: BTreeMap::new(),
            requests_sent: 0,
            results_received: 0,
            window_best: f64::INFINITY,
            exchanges_sent: 0,
            awaiting_ack: None,
            last_gbest: None,
            param_changes: Vec::new(),
            fitness_per_generation: Vec::new(),
        }
    }

    pub fn colony_id(&self) -> usize {
        self.colony.id()
    }

    pub fn in_flight(&self) -> usize {
        self.pending.len()
    }

    pub fn in_flight_cap(&self) -> usize {
        self.in_flight_cap
    }

    pub fn awaiting_pso(&self) -> bool {
        self.awaiting_ack.is_some()
    }

    pub fn generations_done(&self) -> bool {
        self.colony.generation() >= self.generations_per_colony
    }

    /// Normalized particle position of the current params, clamped into the
    /// swarm bounds (initial rosters may start outside them).
    pub fn position(&self) -> Position {
        let clamped = self.bounds.clamp_params(&self.colony.params());
        encode(&clamped, &self.bounds).expect("clamped params are inside the bounds")
    }

    /// Generate the next candidate and emit its evaluation request.
    pub fn start_generation(&mut self) -> Result<Message> {
        debug_assert!(!self.generations_done());
        debug_assert!(!self.awaiting_pso());
        let genome = self.colony.generate_candidate()?;
        self.candidate_seq += 1;
        let seq = self.candidate_seq;
        self.pending.insert(seq, genome.clone());
        self.requests_sent += 1;
        let mut wire_genome = genome;
        wire_genome.provenance_paths = Vec::new();
        Ok(Message::EvalRequest {
            colony_id: self.colony.id(),
            candidate_seq: seq,
            genome: wire_genome,
        })
    }

    /// Fold one evaluation result into the population and window tracking.
    pub fn handle_result(&mut self, candidate_seq: u64, fitness: f64, weights: Vec<f64>) -> Result<()> {
        let genome = self.pending.remove(&candidate_seq).ok_or_else(|| {
            Error::Protocol(format!(
                "colony {}: result for unknown candidate {candidate_seq}",
                self.colony.id()
            ))
        })?;
        self.results_received += 1;
        if fitness.is_finite() {
            self.window_best = self.window_best.min(fitness);
        }
        self.colony.record_result(genome, fitness, weights)?;
        Ok(())
    }

    /// Close the generation: evaporation, mortality, fitness row, and the
    /// exchange report when a window just finished.
    pub fn finish_generation(&mut self) -> Result<Option<Message>> {
        self.colony.end_of_generation()?;
        self.fitness_per_generation
            .push(self.colony.population().best_fitness());
        if self.pso_exchange && self.colony.generation() % self.exchange_interval == 0 {
            let exchange_idx = self.exchanges_sent;
            self.exchanges_sent += 1;
            self.awaiting_ack = Some(exchange_idx);
            let report = Message::PsoReport {
                colony_id: self.colony.id(),
                exchange_idx,
                position: self.position(),
                window_best_fitness: self.window_best,
            };
            self.window_best = f64::INFINITY;
            return Ok(Some(report));
        }
        Ok(None)
    }

    /// Consume a broadcast. The ack for this colony's own outstanding report
    /// carries its moved particle position, which becomes the new params;
    /// other broadcasts only refresh the known global best.
    pub fn apply_broadcast(&mut self, message: &Message) -> Result<()> {
        let Message::PsoBroadcast {
            gbest_position,
            colony_position,
            ack,
        } = message
        else {
            return Err(Error::Protocol("expected a swarm broadcast".into()));
        };
        self.last_gbest = Some(*gbest_position);
        if let Some((colony_id, exchange_idx)) = ack {
            if *colony_id == self.colony.id() {
                if self.awaiting_ack != Some(*exchange_idx) {
                    return Err(Error::Protocol(format!(
                        "colony {colony_id}: unexpected ack for exchange {exchange_idx}"
                    )));
                }
                self.awaiting_ack = None;
                let new_params = decode(*colony_position, &self.bounds);
                if new_params != self.colony.params() {
                    self.colony.apply_params(new_params, &self.bounds)?;
                    self.param_changes.push(ParamChange {
                        generation: self.colony.generation(),
                        params: new_params,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn into_summary(self, lost_in_flight: u64) -> ColonySummary {
        let best = self.colony.population().best().map(|m| {
            (
                m.genome.clone(),
                m.trained_weights.clone(),
                m.fitness,
            )
        });
        ColonySummary {
            colony_id: self.colony.id(),
            best,
            requests_sent: self.requests_sent,
            results_received: self.results_received,
            lost_in_flight,
            exchanges: self.exchanges_sent,
            final_params: self.colony.params(),
            param_changes: self.param_changes,
            fitness_per_generation: self.fitness_per_generation,
        }
    }
}

/// One row of the trait-trajectory log: the params a colony just ran a
/// window with, and the best MSE that window produced.
#[derive(Debug, Clone)]
pub struct TrajectoryRow {
    pub colony_id: usize,
    pub exchange_idx: u64,
    pub params: ColonyParams,
    pub position: Position,
    pub window_best_fitness: f64,
}

/// Environment-role state: the swarm plus completion and trajectory
/// bookkeeping.
pub struct EnvDriver {
    swarm: Swarm,
    rng: ChaCha8Rng,
    rows: Vec<TrajectoryRow>,
    done: Vec<bool>,
}

impl EnvDriver {
    pub fn new(swarm: Swarm, master_seed: u64) -> Self {
        let n = swarm.len();
        Self {
            swarm,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(master_seed, SEED_TAG_PSO, 0)),
            rows: Vec::new(),
            done: vec![false; n],
        }
    }

    /// Process a report: record the sample, move the reporter's particle,
    /// and build one broadcast per colony (the reporter's carries the ack).
    pub fn handle_report(
        &mut self,
        colony_id: usize,
        exchange_idx: u64,
        position: Position,
        window_best_fitness: f64,
    ) -> Result<Vec<(usize, Message)>> {
        if colony_id >= self.swarm.len() {
            return Err(Error::Protocol(format!(
                "report from unknown colony {colony_id}"
            )));
        }
        self.rows.push(TrajectoryRow {
            colony_id,
            exchange_idx,
            params: decode(position, &self.swarm.config().bounds),
            position,
            window_best_fitness,
        });
        self.swarm.report(colony_id, position, window_best_fitness)?;
        let moved = self.swarm.advance(colony_id, &mut self.rng)?;
        let gbest = self.swarm.gbest().map(|(p, _)| p).unwrap_or(moved);

        Ok((0..self.swarm.len())
            .map(|dest| {
                let message = Message::PsoBroadcast {
                    gbest_position: gbest,
                    colony_position: self.swarm.particle(dest).position,
                    ack: (dest == colony_id).then_some((colony_id, exchange_idx)),
                };
                (dest, message)
            })
            .collect())
    }

    pub fn note_done(&mut self, colony_id: usize) -> Result<()> {
        if colony_id >= self.done.len() {
            return Err(Error::Protocol(format!(
                "completion from unknown colony {colony_id}"
            )));
        }
        self.done[colony_id] = true;
        Ok(())
    }

    pub fn all_done(&self) -> bool {
        self.done.iter().all(|&d| d)
    }

    pub fn into_outcome(self) -> (Vec<TrajectoryRow>, Swarm) {
        (self.rows, self.swarm)
    }
}
