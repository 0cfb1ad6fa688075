//! Diversified Proximity Graph construction.
//!
//! A DPG keeps, for every node, `kappa` neighbors out of its K-NN list chosen
//! to point in different directions, then adds the reverse of every kept edge.
//! Two selection rules are provided:
//!
//! * [`diversify_angular`]: greedy selection seeded with the nearest neighbor;
//!   each step adds the candidate whose summed angle (measured at the owning
//!   node) to the already selected points is largest.
//! * [`diversify_counting`]: a candidate `v` scores one point for every other
//!   list member `u` with `dist(v, u) < dist(v, p)`; the `kappa` lowest scores
//!   are kept.
//!
//! Ties in either rule go to the candidate earlier in the source list, i.e. the
//! smaller distance and then the smaller id.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{angle_at, l2, sort_neighbors, DenseDataset, GraphKind, Neighbor, NeighborGraph};
use crate::nndescent::{build_knn_graph, NnDescentParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiversifyMethod {
    Angular,
    #[default]
    Counting,
}

/// Direction of the angular greedy step. `Maximize` spreads the selection;
/// `Minimize` is the literal reading of the arg-min objective and is kept so
/// the two can be compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AngularObjective {
    #[default]
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpgParams {
    pub kappa: usize,
    pub method: DiversifyMethod,
    pub objective: AngularObjective,
    /// Parameters of the underlying K-NN graph. `knn.k` defaults to `2 * kappa`.
    pub knn: NnDescentParams,
}

impl DpgParams {
    pub fn new(kappa: usize, method: DiversifyMethod) -> Self {
        Self {
            kappa,
            method,
            objective: AngularObjective::Maximize,
            knn: NnDescentParams::with_k(2 * kappa),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.knn.validate()?;
        if self.kappa == 0 || self.kappa > self.knn.k {
            return Err(Error::usage(format!(
                "kappa={} must be in 1..=K={}",
                self.kappa, self.knn.k
            )));
        }
        Ok(())
    }
}

impl Default for DpgParams {
    fn default() -> Self {
        Self::new(20, DiversifyMethod::Counting)
    }
}

fn source_list(graph: &NeighborGraph, node: usize, kappa: usize) -> Result<&[Neighbor]> {
    let list = graph.neighbors(node);
    if list.len() < kappa {
        return Err(Error::Structural {
            node,
            message: format!("neighbor list has {} entries, fewer than kappa={kappa}", list.len()),
        });
    }
    Ok(list)
}

fn check_inputs(dataset: &DenseDataset, graph: &NeighborGraph, kappa: usize) -> Result<()> {
    if graph.len() != dataset.len() {
        return Err(Error::usage(format!(
            "graph has {} nodes but dataset has {} points",
            graph.len(),
            dataset.len()
        )));
    }
    if kappa == 0 {
        return Err(Error::usage("kappa must be at least 1"));
    }
    Ok(())
}

/// Angle at `p` used by the greedy step. A neighbor that coincides with `p`
/// has no direction and contributes zero.
fn arm_angle(p: &[f32], x: &[f32], y: &[f32]) -> f64 {
    angle_at(p, x, y).unwrap_or(0.0)
}

pub fn diversify_angular(
    dataset: &DenseDataset,
    graph: &NeighborGraph,
    kappa: usize,
    objective: AngularObjective,
) -> Result<Vec<Vec<Neighbor>>> {
    check_inputs(dataset, graph, kappa)?;
    (0..graph.len())
        .into_par_iter()
        .map(|node| {
            let list = source_list(graph, node, kappa)?;
            Ok(select_angular(dataset, node, list, kappa, objective))
        })
        .collect()
}

fn select_angular(
    dataset: &DenseDataset,
    node: usize,
    list: &[Neighbor],
    kappa: usize,
    objective: AngularObjective,
) -> Vec<Neighbor> {
    let p = dataset.row(node);
    let row = |i: usize| dataset.row(list[i].id as usize);
    let mut taken = vec![false; list.len()];
    let mut chosen = Vec::with_capacity(kappa);
    // summed angle from each candidate to everything selected so far
    let mut score = vec![0.0f64; list.len()];

    let mut last = 0usize;
    taken[0] = true;
    chosen.push(list[0]);
    while chosen.len() < kappa {
        let mut best: Option<usize> = None;
        for j in 0..list.len() {
            if taken[j] {
                continue;
            }
            score[j] += arm_angle(p, row(j), row(last));
            let better = match best {
                None => true,
                Some(b) => match objective {
                    AngularObjective::Maximize => score[j] > score[b],
                    AngularObjective::Minimize => score[j] < score[b],
                },
            };
            if better {
                best = Some(j);
            }
        }
        // list.len() >= kappa, so a candidate always remains
        let pick = best.expect("candidate available");
        taken[pick] = true;
        chosen.push(list[pick]);
        last = pick;
    }
    sort_neighbors(&mut chosen);
    chosen
}

pub fn diversify_counting(
    dataset: &DenseDataset,
    graph: &NeighborGraph,
    kappa: usize,
) -> Result<Vec<Vec<Neighbor>>> {
    check_inputs(dataset, graph, kappa)?;
    (0..graph.len())
        .into_par_iter()
        .map(|node| {
            let list = source_list(graph, node, kappa)?;
            Ok(select_counting(dataset, list, kappa))
        })
        .collect()
}

/// Per-candidate counters: how many other list members are closer to the
/// candidate than the owning node is.
pub fn occlusion_counts(dataset: &DenseDataset, list: &[Neighbor]) -> Vec<usize> {
    let mut counts = vec![0usize; list.len()];
    for a in 0..list.len() {
        let row_a = dataset.row(list[a].id as usize);
        for b in a + 1..list.len() {
            let between = l2(row_a, dataset.row(list[b].id as usize));
            if between < list[a].dist {
                counts[a] += 1;
            }
            if between < list[b].dist {
                counts[b] += 1;
            }
        }
    }
    counts
}

fn select_counting(dataset: &DenseDataset, list: &[Neighbor], kappa: usize) -> Vec<Neighbor> {
    let counts = occlusion_counts(dataset, list);
    let mut order: Vec<usize> = (0..list.len()).collect();
    // stable: equal counts keep list order
    order.sort_by_key(|&i| counts[i]);
    let mut chosen: Vec<Neighbor> = order[..kappa].iter().map(|&i| list[i]).collect();
    sort_neighbors(&mut chosen);
    chosen
}

/// Symmetrizes per-node selections into a DPG. Duplicate edges are merged and
/// every list is re-sorted by `(dist, id)`.
pub fn add_reverse_edges(selected: &[Vec<Neighbor>], kappa: usize) -> Result<NeighborGraph> {
    let n = selected.len();
    let mut adjacency: Vec<Vec<Neighbor>> = selected.to_vec();
    for (p, list) in selected.iter().enumerate() {
        if list.len() > kappa {
            return Err(Error::Structural {
                node: p,
                message: format!("selection has {} entries, more than kappa={kappa}", list.len()),
            });
        }
        for nb in list {
            let u = nb.id as usize;
            if u >= n {
                return Err(Error::Structural {
                    node: p,
                    message: format!("selected id {u} out of range (n={n})"),
                });
            }
            adjacency[u].push(Neighbor::new(p as u32, nb.dist));
        }
    }
    for list in &mut adjacency {
        sort_neighbors(list);
        list.dedup_by_key(|nb| nb.id);
    }
    NeighborGraph::new(GraphKind::Dpg { kappa }, adjacency)
}

pub fn diversify(
    dataset: &DenseDataset,
    knn: &NeighborGraph,
    params: &DpgParams,
) -> Result<Vec<Vec<Neighbor>>> {
    match params.method {
        DiversifyMethod::Angular => diversify_angular(dataset, knn, params.kappa, params.objective),
        DiversifyMethod::Counting => diversify_counting(dataset, knn, params.kappa),
    }
}

/// Diversifies an existing K-NN graph and adds reverse edges.
pub fn dpg_from_knn(dataset: &DenseDataset, knn: &NeighborGraph, params: &DpgParams) -> Result<NeighborGraph> {
    if params.kappa > knn.kind().degree_param() {
        return Err(Error::usage(format!(
            "kappa={} exceeds the source graph's K={}",
            params.kappa,
            knn.kind().degree_param()
        )));
    }
    let selected = diversify(dataset, knn, params)?;
    add_reverse_edges(&selected, params.kappa)
}

/// NN-descent followed by diversification and reverse edges.
pub fn build_dpg(dataset: &DenseDataset, params: &DpgParams) -> Result<NeighborGraph> {
    params.validate()?;
    let knn = build_knn_graph(dataset, &params.knn)?;
    dpg_from_knn(dataset, &knn, params)
}
