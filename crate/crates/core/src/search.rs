//! Greedy best-first kNN search over a [`NeighborGraph`].
//!
//! The pool is a sorted list of at most `L` candidates with explored flags. The
//! search repeatedly expands the first unexplored candidate and stops once the
//! whole pool is explored, so no pooled point has an unvisited neighbor that
//! could still enter the pool.

use std::time::{Duration, Instant};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{DenseDataset, Neighbor, NeighborGraph, SearchParams};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SearchStats {
    /// Distances computed between the query and data points (N).
    pub distance_computations: usize,
    /// Pool entries expanded.
    pub hops: usize,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub neighbors: Vec<Neighbor>,
    pub stats: SearchStats,
}

impl SearchResult {
    pub fn ids(&self) -> Vec<u32> {
        self.neighbors.iter().map(|nb| nb.id).collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    id: u32,
    dist: f32,
    explored: bool,
}

impl Candidate {
    #[inline]
    fn before(&self, dist: f32, id: u32) -> bool {
        self.dist.total_cmp(&dist).then(self.id.cmp(&id)).is_lt()
    }
}

/// Reusable search state over one dataset and graph. Holds the per-query
/// scratch so repeated queries do not reallocate the visited set.
pub struct GraphSearcher<'a> {
    dataset: &'a DenseDataset,
    graph: &'a NeighborGraph,
    // visited[i] == epoch marks point i as visited in the current query
    visited: Vec<u32>,
    epoch: u32,
    pool: Vec<Candidate>,
}

impl<'a> GraphSearcher<'a> {
    pub fn new(dataset: &'a DenseDataset, graph: &'a NeighborGraph) -> Result<Self> {
        if graph.len() != dataset.len() {
            return Err(Error::usage(format!(
                "graph has {} nodes but dataset has {} points",
                graph.len(),
                dataset.len()
            )));
        }
        Ok(Self {
            dataset,
            graph,
            visited: vec![0; dataset.len()],
            epoch: 0,
            pool: Vec::new(),
        })
    }

    /// Entry points for `params`: `p` distinct ids drawn with the params' seed.
    pub fn entry_points(&self, params: &SearchParams) -> Vec<u32> {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        index::sample(&mut rng, self.dataset.len(), params.entry_count)
            .into_iter()
            .map(|i| i as u32)
            .collect()
    }

    pub fn search(&mut self, query: &[f32], params: &SearchParams) -> Result<SearchResult> {
        params.validate(self.dataset.len())?;
        let entries = self.entry_points(params);
        self.search_from(query, &entries, params.k, params.pool_size)
    }

    /// Search seeded with explicit entry points (all inserted before the first expansion).
    pub fn search_from(
        &mut self,
        query: &[f32],
        entries: &[u32],
        k: usize,
        pool_size: usize,
    ) -> Result<SearchResult> {
        let n = self.dataset.len();
        if query.len() != self.dataset.dim() {
            return Err(Error::usage(format!(
                "query dimension {} does not match dataset dimension {}",
                query.len(),
                self.dataset.dim()
            )));
        }
        if k == 0 || pool_size < k {
            return Err(Error::usage(format!(
                "need 1 <= k <= L, got k={k} L={pool_size}"
            )));
        }
        if entries.is_empty() {
            return Err(Error::usage("at least one entry point is required"));
        }
        if let Some(bad) = entries.iter().find(|&&e| e as usize >= n) {
            return Err(Error::usage(format!("entry point {bad} out of range (n={n})")));
        }

        let start = Instant::now();
        self.next_epoch();
        self.pool.clear();
        self.pool.reserve(pool_size + 1);
        let mut stats = SearchStats::default();

        for &e in entries {
            if self.visit(e) {
                let dist = self.dataset.dist_to(e as usize, query);
                stats.distance_computations += 1;
                self.offer(pool_size, e, dist);
            }
        }

        let mut cursor = 0usize;
        loop {
            while cursor < self.pool.len() && self.pool[cursor].explored {
                cursor += 1;
            }
            if cursor >= self.pool.len() {
                break;
            }
            self.pool[cursor].explored = true;
            let node = self.pool[cursor].id as usize;
            stats.hops += 1;
            let graph = self.graph;
            let mut lowest_insert = usize::MAX;
            for nb in graph.neighbors(node) {
                if !self.visit(nb.id) {
                    continue;
                }
                let dist = self.dataset.dist_to(nb.id as usize, query);
                stats.distance_computations += 1;
                if let Some(pos) = self.offer(pool_size, nb.id, dist) {
                    lowest_insert = lowest_insert.min(pos);
                }
            }
            cursor = cursor.min(lowest_insert);
        }

        if self.pool.len() < k {
            return Err(Error::usage(format!(
                "search reached only {} points, fewer than k={k}",
                self.pool.len()
            )));
        }
        let neighbors = self.pool[..k]
            .iter()
            .map(|c| Neighbor::new(c.id, c.dist))
            .collect();
        stats.wall_time = start.elapsed();
        Ok(SearchResult { neighbors, stats })
    }

    fn next_epoch(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.visited.fill(0);
            self.epoch = 1;
        }
    }

    /// Marks `id` visited; false if it already was.
    #[inline]
    fn visit(&mut self, id: u32) -> bool {
        let slot = &mut self.visited[id as usize];
        if *slot == self.epoch {
            false
        } else {
            *slot = self.epoch;
            true
        }
    }

    /// Inserts into the bounded pool; returns the insert position if kept.
    #[inline]
    fn offer(&mut self, cap: usize, id: u32, dist: f32) -> Option<usize> {
        if self.pool.len() == cap {
            let last = self.pool.last()?;
            let worse = last.dist.total_cmp(&dist).then(last.id.cmp(&id)).is_le();
            if worse {
                return None;
            }
        }
        let pos = self.pool.partition_point(|c| c.before(dist, id));
        self.pool.insert(
            pos,
            Candidate {
                id,
                dist,
                explored: false,
            },
        );
        self.pool.truncate(cap);
        Some(pos)
    }
}

/// One-shot search; see [`GraphSearcher`] for repeated queries.
pub fn greedy_search(
    dataset: &DenseDataset,
    graph: &NeighborGraph,
    query: &[f32],
    params: &SearchParams,
) -> Result<SearchResult> {
    GraphSearcher::new(dataset, graph)?.search(query, params)
}

/// `|results ∩ truth| / k`, where both lists hold `k` ids.
pub fn recall(results: &[u32], truth: &[u32]) -> Result<f64> {
    if results.len() != truth.len() || truth.is_empty() {
        return Err(Error::usage(format!(
            "recall needs two non-empty lists of equal length, got {} and {}",
            results.len(),
            truth.len()
        )));
    }
    let hits = results.iter().filter(|id| truth.contains(id)).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GraphKind;
    use crate::oracle::brute_force_knn;

    fn complete_graph(ds: &DenseDataset) -> NeighborGraph {
        let n = ds.len();
        let adj = (0..n)
            .map(|v| {
                let mut l: Vec<Neighbor> = (0..n)
                    .filter(|&u| u != v)
                    .map(|u| Neighbor::new(u as u32, ds.dist_to(u, ds.row(v))))
                    .collect();
                crate::model::sort_neighbors(&mut l);
                l
            })
            .collect();
        NeighborGraph::new(GraphKind::KnnGraph { k: n - 1 }, adj).unwrap()
    }

    fn grid(n: usize) -> DenseDataset {
        let rows: Vec<Vec<f32>> = (0..n).map(|i| vec![(i % 7) as f32, (i / 7) as f32 * 1.3]).collect();
        DenseDataset::from_rows(&rows).unwrap()
    }

    #[test]
    fn recall_examples() {
        assert_eq!(recall(&[1, 2, 3], &[3, 2, 1]).unwrap(), 1.0);
        assert_eq!(recall(&[1, 2], &[3, 4]).unwrap(), 0.0);
        let truth: Vec<u32> = (0..20).collect();
        let mut got: Vec<u32> = (0..17).collect();
        got.extend([100, 101, 102]);
        assert!((recall(&got, &truth).unwrap() - 0.85).abs() < 1e-12);
        assert!(recall(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn complete_graph_is_exact() {
        let ds = grid(30);
        let g = complete_graph(&ds);
        let q = [2.4f32, 1.1];
        for k in 1..=10 {
            let res = greedy_search(&ds, &g, &q, &SearchParams { entry_count: 1, ..SearchParams::new(k, k) }).unwrap();
            let truth = brute_force_knn(&ds, &q, k).unwrap();
            assert_eq!(res.neighbors, truth);
        }
    }

    #[test]
    fn nn_entry_is_kept() {
        let ds = grid(40);
        let g = crate::oracle::exact_knn_graph(&ds, 3).unwrap();
        let q = [5.2f32, 3.0];
        let nn = brute_force_knn(&ds, &q, 1).unwrap()[0];
        let mut s = GraphSearcher::new(&ds, &g).unwrap();
        let res = s.search_from(&q, &[nn.id], 5, 8).unwrap();
        assert_eq!(res.neighbors[0], nn);
    }

    #[test]
    fn disconnected_component_gives_zero_recall() {
        // two clusters, edges only inside each
        let rows: Vec<Vec<f32>> = (0..10)
            .map(|i| if i < 5 { vec![i as f32, 0.0] } else { vec![100.0 + i as f32, 0.0] })
            .collect();
        let ds = DenseDataset::from_rows(&rows).unwrap();
        let adj = (0..10u32)
            .map(|v| {
                let base = if v < 5 { 0 } else { 5 };
                let mut l: Vec<Neighbor> = (base..base + 5)
                    .filter(|&u| u != v)
                    .map(|u| Neighbor::new(u, ds.dist_to(u as usize, ds.row(v as usize))))
                    .collect();
                crate::model::sort_neighbors(&mut l);
                l
            })
            .collect();
        let g = NeighborGraph::new(GraphKind::KnnGraph { k: 4 }, adj).unwrap();
        let q = [107.0f32, 0.0];
        let truth: Vec<u32> = brute_force_knn(&ds, &q, 3).unwrap().iter().map(|nb| nb.id).collect();
        let mut s = GraphSearcher::new(&ds, &g).unwrap();
        let res = s.search_from(&q, &[0], 3, 5).unwrap();
        assert_eq!(recall(&res.ids(), &truth).unwrap(), 0.0);
        assert_eq!(res.stats.distance_computations, 5);
    }

    #[test]
    fn stats_and_determinism() {
        let ds = grid(49);
        let g = crate::oracle::exact_knn_graph(&ds, 6).unwrap();
        let params = SearchParams { entry_count: 3, ..SearchParams::new(5, 10) };
        let q = [3.3f32, 2.2];
        let a = greedy_search(&ds, &g, &q, &params).unwrap();
        let b = greedy_search(&ds, &g, &q, &params).unwrap();
        assert_eq!(a.neighbors, b.neighbors);
        assert_eq!(a.stats.distance_computations, b.stats.distance_computations);
        assert!(a.stats.distance_computations >= 5 && a.stats.distance_computations <= 49);
        assert!(a.neighbors.windows(2).all(|w| w[0].cmp_by_dist(&w[1]).is_lt()));
    }

    #[test]
    fn bad_params_are_usage_errors() {
        let ds = grid(10);
        let g = crate::oracle::exact_knn_graph(&ds, 3).unwrap();
        for p in [
            SearchParams::new(5, 4),
            SearchParams { entry_count: 0, ..SearchParams::new(2, 4) },
        ] {
            assert!(matches!(greedy_search(&ds, &g, ds.row(0), &p), Err(Error::Usage(_))));
        }
    }
}
