//! Discrete graph genomes built from continuous ant paths.
//!
//! A generation's paths are clustered by fixed-radius agglomeration; each
//! cluster becomes a node, consecutive clusters along a path become
//! feed-forward edges (kept only when depth strictly increases, so the edge
//! set is acyclic by construction), and every surviving hidden node gets a
//! recurrent self-edge whose time-skip is discretized from the cluster's z
//! coordinate.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ants::AntPath;
use crate::error::{Error, Result};
use crate::space::Point3;

/// Role of a node in the network graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Input(usize),
    Hidden,
    Output(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenomeNode {
    pub id: usize,
    pub centroid: Point3,
    pub kind: NodeKind,
    /// Longest feed-forward distance from any input node.
    pub layer_rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecEdge {
    pub src: usize,
    pub dst: usize,
    pub time_skip: usize,
}

/// A graph-RNN description: the discrete image of one generation's paths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Genome {
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub max_recurrent_depth: usize,
    pub nodes: Vec<GenomeNode>,
    /// (src, dst) pairs, strictly increasing in centroid y.
    pub ff_edges: Vec<(usize, usize)>,
    pub rec_edges: Vec<RecEdge>,
    /// Paths that generated this genome; pheromone is deposited along them
    /// when the genome enters a population. Not part of the wire format.
    #[serde(default, skip)]
    pub provenance_paths: Vec<AntPath>,
}

/// One cluster produced by [`cluster_points`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cluster {
    pub centroid: Point3,
    pub kind: NodeKind,
    pub size: usize,
}

fn classify(p: &Point3, n_inputs: usize, n_outputs: usize) -> NodeKind {
    if p.y == 0.0 {
        let idx = ((p.x * n_inputs as f64) as usize).min(n_inputs - 1);
        NodeKind::Input(idx)
    } else if p.y == 1.0 {
        let idx = ((p.x * n_outputs as f64) as usize).min(n_outputs - 1);
        NodeKind::Output(idx)
    } else {
        NodeKind::Hidden
    }
}

/// Deterministic fixed-radius agglomeration in input order.
///
/// Each point joins the first existing compatible cluster whose current
/// centroid lies within `cluster_radius`, else founds a new one; the centroid
/// is the running mean of the members. Anchor points (y = 0 or y = 1) only
/// ever merge with anchors of the same slot.
pub fn cluster_points(
    points: &[Point3],
    cluster_radius: f64,
    n_inputs: usize,
    n_outputs: usize,
) -> (Vec<usize>, Vec<Cluster>) {
    debug_assert!(cluster_radius > 0.0);
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut assignment = Vec::with_capacity(points.len());

    for p in points {
        let kind = classify(p, n_inputs, n_outputs);
        let joined = clusters
            .iter()
            .position(|c| c.kind == kind && c.centroid.distance(p) <= cluster_radius);
        match joined {
            Some(i) => {
                let c = &mut clusters[i];
                let n = c.size as f64;
                c.centroid = Point3::clamped(
                    (c.centroid.x * n + p.x) / (n + 1.0),
                    (c.centroid.y * n + p.y) / (n + 1.0),
                    (c.centroid.z * n + p.z) / (n + 1.0),
                );
                c.size += 1;
                assignment.push(i);
            }
            None => {
                clusters.push(Cluster {
                    centroid: *p,
                    kind,
                    size: 1,
                });
                assignment.push(clusters.len() - 1);
            }
        }
    }
    (assignment, clusters)
}

/// Cluster a generation's paths and assemble the genome.
///
/// Fails with [`Error::DegenerateGenome`] when pruning leaves no usable
/// network (no surviving input, or an output slot without a route).
pub fn build_genome(
    paths: Vec<AntPath>,
    cluster_radius: f64,
    n_inputs: usize,
    n_outputs: usize,
    max_recurrent_depth: usize,
) -> Result<Genome> {
    if paths.is_empty() {
        return Err(Error::InputDomain(
            "build_genome needs at least one path".into(),
        ));
    }
    let all_points: Vec<Point3> = paths
        .iter()
        .flat_map(|p| p.points.iter().copied())
        .collect();
    let (assignment, clusters) = cluster_points(&all_points, cluster_radius, n_inputs, n_outputs);

    // Edges between consecutive distinct clusters along each path, kept only
    // when final-centroid depth strictly increases.
    let mut ff: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut offset = 0;
    for path in &paths {
        let ids = &assignment[offset..offset + path.points.len()];
        offset += path.points.len();
        for w in ids.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a != b && clusters[b].centroid.y > clusters[a].centroid.y {
                ff.insert((a, b));
            }
        }
    }

    // Keep only nodes that sit on some input-to-output route.
    let n = clusters.len();
    let mut fwd = vec![false; n];
    let mut bwd = vec![false; n];
    let mut stack: Vec<usize> = (0..n)
        .filter(|&i| matches!(clusters[i].kind, NodeKind::Input(_)))
        .collect();
    for &i in &stack {
        fwd[i] = true;
    }
    while let Some(i) = stack.pop() {
        for &(s, d) in &ff {
            if s == i && !fwd[d] {
                fwd[d] = true;
                stack.push(d);
            }
        }
    }
    let mut stack: Vec<usize> = (0..n)
        .filter(|&i| matches!(clusters[i].kind, NodeKind::Output(_)))
        .collect();
    for &i in &stack {
        bwd[i] = true;
    }
    while let Some(i) = stack.pop() {
        for &(s, d) in &ff {
            if d == i && !bwd[s] {
                bwd[s] = true;
                stack.push(s);
            }
        }
    }
    let keep: Vec<bool> = (0..n).map(|i| fwd[i] && bwd[i]).collect();

    for o in 0..n_outputs {
        let ok = (0..n).any(|i| keep[i] && clusters[i].kind == NodeKind::Output(o));
        if !ok {
            return Err(Error::DegenerateGenome(format!(
                "output slot {o} has no input-to-output route"
            )));
        }
    }
    if !(0..n).any(|i| keep[i] && matches!(clusters[i].kind, NodeKind::Input(_))) {
        return Err(Error::DegenerateGenome(
            "no input node survived pruning".into(),
        ));
    }

    // Compact ids, preserving cluster creation order.
    let mut remap = vec![usize::MAX; n];
    let mut nodes = Vec::new();
    for i in 0..n {
        if keep[i] {
            remap[i] = nodes.len();
            nodes.push(GenomeNode {
                id: nodes.len(),
                centroid: clusters[i].centroid,
                kind: clusters[i].kind,
                layer_rank: 0,
            });
        }
    }
    let ff_edges: Vec<(usize, usize)> = ff
        .iter()
        .filter(|(s, d)| keep[*s] && keep[*d])
        .map(|&(s, d)| (remap[s], remap[d]))
        .collect();

    let rec_edges: Vec<RecEdge> = nodes
        .iter()
        .filter(|node| node.kind == NodeKind::Hidden)
        .map(|node| {
            let raw = 1 + (node.centroid.z * max_recurrent_depth as f64).floor() as usize;
            RecEdge {
                src: node.id,
                dst: node.id,
                time_skip: raw.clamp(1, max_recurrent_depth),
            }
        })
        .collect();

    // Longest feed-forward distance from the input level; edges follow
    // strictly increasing y, so one pass in y order settles every rank.
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&a, &b| {
        nodes[a]
            .centroid
            .y
            .total_cmp(&nodes[b].centroid.y)
            .then(nodes[a].centroid.x.total_cmp(&nodes[b].centroid.x))
    });
    for &i in &order {
        let rank = ff_edges
            .iter()
            .filter(|(_, d)| *d == i)
            .map(|&(s, _)| nodes[s].layer_rank + 1)
            .max()
            .unwrap_or(0);
        nodes[i].layer_rank = rank;
    }

    Ok(Genome {
        n_inputs,
        n_outputs,
        max_recurrent_depth,
        nodes,
        ff_edges,
        rec_edges,
        provenance_paths: paths,
    })
}

impl Genome {
    pub fn hidden_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Hidden)
            .count()
    }

    /// Check the structural invariants; used by fuzz tests and on ingest of
    /// externally supplied genome files.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                return Err(Error::InputDomain(format!(
                    "node id {} at index {i}; ids must be dense",
                    node.id
                )));
            }
            match node.kind {
                NodeKind::Input(f) if f >= self.n_inputs => {
                    return Err(Error::InputDomain(format!(
                        "input feature {f} out of range"
                    )));
                }
                NodeKind::Output(o) if o >= self.n_outputs => {
                    return Err(Error::InputDomain(format!("output slot {o} out of range")));
                }
                _ => {}
            }
        }
        let mut seen = BTreeSet::new();
        for &(s, d) in &self.ff_edges {
            if s >= n || d >= n {
                return Err(Error::InputDomain(format!("edge ({s}, {d}) out of range")));
            }
            if !(self.nodes[d].centroid.y > self.nodes[s].centroid.y) {
                return Err(Error::InputDomain(format!(
                    "edge ({s}, {d}) does not increase in depth"
                )));
            }
            if !seen.insert((s, d)) {
                return Err(Error::InputDomain(format!("duplicate edge ({s}, {d})")));
            }
        }
        let mut seen_rec = BTreeSet::new();
        for e in &self.rec_edges {
            if e.src >= n || e.dst >= n {
                return Err(Error::InputDomain("recurrent edge out of range".into()));
            }
            if e.time_skip < 1 || e.time_skip > self.max_recurrent_depth {
                return Err(Error::InputDomain(format!(
                    "time skip {} outside [1, {}]",
                    e.time_skip, self.max_recurrent_depth
                )));
            }
            if !seen_rec.insert((e.src, e.dst, e.time_skip)) {
                return Err(Error::InputDomain("duplicate recurrent edge".into()));
            }
        }

        // Every node on an input-to-output route.
        let mut fwd = vec![false; n];
        let mut bwd = vec![false; n];
        let mut stack: Vec<usize> = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if matches!(node.kind, NodeKind::Input(_)) {
                fwd[i] = true;
                stack.push(i);
            }
        }
        while let Some(i) = stack.pop() {
            for &(s, d) in &self.ff_edges {
                if s == i && !fwd[d] {
                    fwd[d] = true;
                    stack.push(d);
                }
            }
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if matches!(node.kind, NodeKind::Output(_)) {
                bwd[i] = true;
                stack.push(i);
            }
        }
        while let Some(i) = stack.pop() {
            for &(s, d) in &self.ff_edges {
                if d == i && !bwd[s] {
                    bwd[s] = true;
                    stack.push(s);
                }
            }
        }
        for i in 0..n {
            if !(fwd[i] && bwd[i]) {
                return Err(Error::InputDomain(format!(
                    "node {i} is not on any input-to-output route"
                )));
            }
        }
        Ok(())
    }
}
