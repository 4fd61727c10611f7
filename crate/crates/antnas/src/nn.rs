//! Executable recurrent networks compiled from genomes.
//!
//! Hidden nodes use tanh with a bias; input and output nodes are identity
//! without one. Recurrent edges read the source node's value `time_skip`
//! steps back, with zero history before the series starts. Training is full
//! (untruncated) backpropagation through time with batch gradient descent
//! and global gradient-norm clipping.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::{Genome, NodeKind};

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub gradient_clip: f64,
    pub weight_init_scale: f64,
    /// Tail fraction of the training window held out for validation MSE.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            learning_rate: 0.01,
            gradient_clip: 1.0,
            weight_init_scale: 0.1,
            validation_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.epochs < 1 {
            problems.push("train.epochs must be >= 1".to_string());
        }
        if !(self.learning_rate > 0.0) {
            problems.push("train.learning_rate must be > 0".to_string());
        }
        if !(self.gradient_clip > 0.0) {
            problems.push("train.gradient_clip must be > 0".to_string());
        }
        if !(self.weight_init_scale > 0.0) {
            problems.push("train.weight_init_scale must be > 0".to_string());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction <= 0.5) {
            problems.push("train.validation_fraction must lie in (0, 0.5]".to_string());
        }
        problems
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Activation {
    Identity,
    Tanh,
}

#[derive(Debug, Clone)]
struct CompiledNode {
    kind: NodeKind,
    activation: Activation,
    /// Bias parameter index; hidden nodes only.
    bias: Option<usize>,
    /// Incoming feed-forward edges as (weight index, source node).
    ff_in: Vec<(usize, usize)>,
    /// Incoming recurrent edges as (weight index, source node, time skip).
    rec_in: Vec<(usize, usize, usize)>,
}

/// A genome lowered to an executable form: topologically ordered nodes plus
/// a flat parameter vector layout `[ff weights | rec weights | biases]`.
#[derive(Debug, Clone)]
pub struct RnnGraph {
    pub n_inputs: usize,
    pub n_outputs: usize,
    nodes: Vec<CompiledNode>,
    /// Feature index -> node position, for nodes that exist in the genome.
    input_nodes: Vec<Option<usize>>,
    /// Output slot -> node position.
    output_nodes: Vec<usize>,
    param_len: usize,
    /// Seeded uniform(-scale, +scale) weights, zero biases.
    pub initial_weights: Vec<f64>,
}

/// Deterministically lower a genome and initialize its weights.
///
/// Node order is topological with a lexicographic (centroid y, x) tie-break,
/// so the same genome and seed always produce the same parameter vector.
pub fn compile<R: Rng>(genome: &Genome, weight_init_scale: f64, rng: &mut R) -> Result<RnnGraph> {
    genome.validate().map_err(|e| {
        Error::InputDomain(format!("compile requires a valid genome: {e}"))
    })?;

    let n = genome.nodes.len();
    let mut indegree = vec![0usize; n];
    for &(_, d) in &genome.ff_edges {
        indegree[d] += 1;
    }
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    while !ready.is_empty() {
        let pick = ready
            .iter()
            .enumerate()
            .min_by(|(_, &a), (_, &b)| {
                let na = &genome.nodes[a].centroid;
                let nb = &genome.nodes[b].centroid;
                na.y.total_cmp(&nb.y).then(na.x.total_cmp(&nb.x)).then(a.cmp(&b))
            })
            .map(|(slot, _)| slot)
            .expect("ready list non-empty");
        let node = ready.swap_remove(pick);
        order.push(node);
        for &(s, d) in &genome.ff_edges {
            if s == node {
                indegree[d] -= 1;
                if indegree[d] == 0 {
                    ready.push(d);
                }
            }
        }
    }
    if order.len() != n {
        // Unreachable given the validated y-increasing edge set.
        return Err(Error::Protocol("feed-forward subgraph has a cycle".into()));
    }
    let mut pos = vec![0usize; n];
    for (topo_idx, &id) in order.iter().enumerate() {
        pos[id] = topo_idx;
    }

    // Parameter layout: ff weights in genome edge order, then rec weights,
    // then hidden biases in topological order.
    let ff_count = genome.ff_edges.len();
    let rec_count = genome.rec_edges.len();
    let mut nodes: Vec<CompiledNode> = order
        .iter()
        .map(|&id| {
            let g = &genome.nodes[id];
            CompiledNode {
                kind: g.kind,
                activation: if g.kind == NodeKind::Hidden {
                    Activation::Tanh
                } else {
                    Activation::Identity
                },
                bias: None,
                ff_in: Vec::new(),
                rec_in: Vec::new(),
            }
        })
        .collect();
    for (w_idx, &(s, d)) in genome.ff_edges.iter().enumerate() {
        nodes[pos[d]].ff_in.push((w_idx, pos[s]));
    }
    for (r_idx, e) in genome.rec_edges.iter().enumerate() {
        nodes[pos[e.dst]]
            .rec_in
            .push((ff_count + r_idx, pos[e.src], e.time_skip));
    }
    let mut bias_count = 0;
    for node in nodes.iter_mut() {
        if node.kind == NodeKind::Hidden {
            node.bias = Some(ff_count + rec_count + bias_count);
            bias_count += 1;
        }
    }

    let mut input_nodes = vec![None; genome.n_inputs];
    let mut output_nodes = vec![usize::MAX; genome.n_outputs];
    for (topo_idx, node) in nodes.iter().enumerate() {
        match node.kind {
            NodeKind::Input(f) => input_nodes[f] = Some(topo_idx),
            NodeKind::Output(o) => output_nodes[o] = topo_idx,
            NodeKind::Hidden => {}
        }
    }
    if output_nodes.iter().any(|&i| i == usize::MAX) {
        return Err(Error::InputDomain(
            "genome does not cover every output slot".into(),
        ));
    }

    let param_len = ff_count + rec_count + bias_count;
    let mut initial_weights = Vec::with_capacity(param_len);
    for _ in 0..ff_count + rec_count {
        initial_weights.push(rng.gen_range(-weight_init_scale..=weight_init_scale));
    }
    initial_weights.resize(param_len, 0.0);

    Ok(RnnGraph {
        n_inputs: genome.n_inputs,
        n_outputs: genome.n_outputs,
        nodes,
        input_nodes,
        output_nodes,
        param_len,
        initial_weights,
    })
}

impl RnnGraph {
    pub fn param_len(&self) -> usize {
        self.param_len
    }

    fn check_shapes(&self, weights: &[f64], series: &[Vec<f64>]) -> Result<()> {
        if weights.len() != self.param_len {
            return Err(Error::InputDomain(format!(
                "weight vector has {} parameters, graph expects {}",
                weights.len(),
                self.param_len
            )));
        }
        if series.is_empty() {
            return Err(Error::InputDomain("series must have at least one step".into()));
        }
        if let Some(row) = series.iter().find(|r| r.len() != self.n_inputs) {
            return Err(Error::InputDomain(format!(
                "series row has {} columns, graph expects {}",
                row.len(),
                self.n_inputs
            )));
        }
        Ok(())
    }

    /// Node values for steps `0..t_end`, flattened as `t * n_nodes + node`.
    fn roll_forward(&self, weights: &[f64], series: &[Vec<f64>], t_end: usize) -> Vec<f64> {
        let n = self.nodes.len();
        let mut values = vec![0.0; t_end * n];
        for t in 0..t_end {
            for (i, node) in self.nodes.iter().enumerate() {
                let v = if let NodeKind::Input(f) = node.kind {
                    series[t][f]
                } else {
                    let mut pre = node.bias.map_or(0.0, |b| weights[b]);
                    for &(w, src) in &node.ff_in {
                        pre += weights[w] * values[t * n + src];
                    }
                    for &(w, src, skip) in &node.rec_in {
                        if t >= skip {
                            pre += weights[w] * values[(t - skip) * n + src];
                        }
                    }
                    match node.activation {
                        Activation::Identity => pre,
                        Activation::Tanh => pre.tanh(),
                    }
                };
                values[t * n + i] = v;
            }
        }
        values
    }
}

/// Run the network over a series and collect the per-step outputs.
pub fn forward(graph: &RnnGraph, weights: &[f64], series: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    graph.check_shapes(weights, series)?;
    let n = graph.nodes.len();
    let values = graph.roll_forward(weights, series, series.len());
    Ok((0..series.len())
        .map(|t| {
            graph
                .output_nodes
                .iter()
                .map(|&o| values[t * n + o])
                .collect()
        })
        .collect())
}

/// Mean squared error over all steps and outputs.
pub fn mse(predictions: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::InputDomain("mse over empty input".into()));
    }
    if predictions.len() != targets.len() {
        return Err(Error::InputDomain(format!(
            "mse shape mismatch: {} prediction steps vs {} target steps",
            predictions.len(),
            targets.len()
        )));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, t) in predictions.iter().zip(targets.iter()) {
        if p.len() != t.len() {
            return Err(Error::InputDomain(
                "mse shape mismatch: differing output counts".into(),
            ));
        }
        for (a, b) in p.iter().zip(t.iter()) {
            let d = a - b;
            sum += d * d;
            count += 1;
        }
    }
    Ok(sum / count as f64)
}

/// Gradient of the mean-squared training loss over `series[..t_fit]`,
/// computed by backpropagation through the full unrolled network.
fn bptt_gradient(
    graph: &RnnGraph,
    weights: &[f64],
    series: &[Vec<f64>],
    targets: &[Vec<f64>],
    t_fit: usize,
) -> (Vec<f64>, f64) {
    let n = graph.nodes.len();
    let values = graph.roll_forward(weights, series, t_fit);
    let denom = (t_fit * graph.n_outputs) as f64;

    let mut loss = 0.0;
    let mut grad_v = vec![0.0; t_fit * n];
    for t in 0..t_fit {
        for (o, &node) in graph.output_nodes.iter().enumerate() {
            let err = values[t * n + node] - targets[t][o];
            loss += err * err;
            grad_v[t * n + node] = 2.0 * err / denom;
        }
    }
    loss /= denom;

    let mut grad = vec![0.0; graph.param_len];
    for t in (0..t_fit).rev() {
        for i in (0..n).rev() {
            let g = grad_v[t * n + i];
            if g == 0.0 {
                continue;
            }
            let node = &graph.nodes[i];
            if matches!(node.kind, NodeKind::Input(_)) {
                continue;
            }
            let dpre = match node.activation {
                Activation::Identity => g,
                Activation::Tanh => {
                    let v = values[t * n + i];
                    g * (1.0 - v * v)
                }
            };
            if let Some(b) = node.bias {
                grad[b] += dpre;
            }
            for &(w, src) in &node.ff_in {
                grad[w] += dpre * values[t * n + src];
                grad_v[t * n + src] += dpre * weights[w];
            }
            for &(w, src, skip) in &node.rec_in {
                if t >= skip {
                    grad[w] += dpre * values[(t - skip) * n + src];
                    grad_v[(t - skip) * n + src] += dpre * weights[w];
                }
            }
        }
    }
    (grad, loss)
}

/// Result of training one candidate.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: Vec<f64>,
    /// MSE on the held-out tail of the training window; `f64::INFINITY` when
    /// training diverged and the candidate must be rejected.
    pub validation_mse: f64,
}

impl TrainOutcome {
    pub fn diverged(&self) -> bool {
        !self.validation_mse.is_finite()
    }
}

/// Full-unroll BPTT with batch gradient descent.
///
/// Gradients are taken over the head of the window; the tail fraction is
/// held out and scored with the final weights after a warm full-window pass.
pub fn train_bptt(
    graph: &RnnGraph,
    series: &[Vec<f64>],
    targets: &[Vec<f64>],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    graph.check_shapes(&graph.initial_weights, series)?;
    if series.len() != targets.len() {
        return Err(Error::InputDomain(format!(
            "series has {} steps but targets has {}",
            series.len(),
            targets.len()
        )));
    }
    if targets.iter().any(|r| r.len() != graph.n_outputs) {
        return Err(Error::InputDomain("target row width mismatch".into()));
    }
    let t = series.len();
    if t <= 4 {
        return Err(Error::InputDomain(format!(
            "training window must exceed 4 steps, got {t}"
        )));
    }
    let val_len = ((t as f64 * config.validation_fraction) as usize).max(1);
    let t_fit = t - val_len;

    let mut weights = graph.initial_weights.clone();
    for _ in 0..config.epochs {
        let (mut grad, loss) = bptt_gradient(graph, &weights, series, targets, t_fit);
        if !loss.is_finite() {
            return Ok(TrainOutcome {
                weights,
                validation_mse: f64::INFINITY,
            });
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Ok(TrainOutcome {
                weights,
                validation_mse: f64::INFINITY,
            });
        }
        if norm > config.gradient_clip {
            let scale = config.gradient_clip / norm;
            for g in grad.iter_mut() {
                *g *= scale;
            }
        }
        for (w, g) in weights.iter_mut().zip(grad.iter()) {
            *w -= config.learning_rate * g;
        }
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Ok(TrainOutcome {
            weights,
            validation_mse: f64::INFINITY,
        });
    }

    let predictions = forward(graph, &weights, series)?;
    let validation_mse = mse(&predictions[t_fit..], &targets[t_fit..])?;
    if !validation_mse.is_finite() {
        return Ok(TrainOutcome {
            weights,
            validation_mse: f64::INFINITY,
        });
    }
    Ok(TrainOutcome {
        weights,
        validation_mse,
    })
}

/// Compare the analytic BPTT gradient of the total loss against central
/// finite differences; returns the worst relative error over parameters.
///
/// The numeric side goes through `forward` + `mse` only, so the two routes
/// share no gradient code.
pub fn grad_check(
    graph: &RnnGraph,
    series: &[Vec<f64>],
    targets: &[Vec<f64>],
    epsilon: f64,
) -> Result<f64> {
    if graph.param_len == 0 {
        return Ok(0.0);
    }
    graph.check_shapes(&graph.initial_weights, series)?;
    let t = series.len();
    let weights = &graph.initial_weights;
    let (analytic, _) = bptt_gradient(graph, weights, series, targets, t);

    let mut worst: f64 = 0.0;
    for i in 0..graph.param_len {
        let mut plus = weights.clone();
        plus[i] += epsilon;
        let mut minus = weights.clone();
        minus[i] -= epsilon;
        let loss_plus = mse(&forward(graph, &plus, series)?, targets)?;
        let loss_minus = mse(&forward(graph, &minus, series)?, targets)?;
        let numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}
