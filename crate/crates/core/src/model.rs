//! Shared domain types: datasets, neighbor lists, graphs and search parameters.

use std::cmp::Ordering;
use std::ops::Deref;

use crate::error::{Error, Result};

/// Row-major `n x d` matrix of finite `f32` points. Point ids are row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseDataset {
    n: usize,
    d: usize,
    data: Vec<f32>,
}

impl DenseDataset {
    pub fn new(n: usize, d: usize, data: Vec<f32>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::usage(format!(
                "dataset must have n >= 1 and d >= 1, got n={n} d={d}"
            )));
        }
        if data.len() != n * d {
            return Err(Error::usage(format!(
                "dataset buffer has {} values, expected n*d = {}",
                data.len(),
                n * d
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::usage(format!(
                "non-finite value at row {} column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::usage(format!(
                "row {bad} has dimension {}, expected {d}",
                rows[bad].len()
            )));
        }
        Self::new(rows.len(), d, rows.concat())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    /// New dataset made of the listed rows, in the listed order.
    pub fn select(&self, ids: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(ids.len() * self.d);
        for &i in ids {
            if i >= self.n {
                return Err(Error::usage(format!("row {i} out of range (n={})", self.n)));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(ids.len(), self.d, data)
    }

    /// Distance from `query` to row `i`.
    #[inline]
    pub fn dist_to(&self, i: usize, query: &[f32]) -> f32 {
        l2(self.row(i), query)
    }
}

/// Queries aimed at a dataset of the same dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySet(DenseDataset);

impl QuerySet {
    pub fn new(queries: DenseDataset) -> Self {
        Self(queries)
    }

    pub fn into_inner(self) -> DenseDataset {
        self.0
    }

    /// Checks that the queries can be run against `dataset`.
    pub fn check_against(&self, dataset: &DenseDataset) -> Result<()> {
        if self.dim() != dataset.dim() {
            return Err(Error::usage(format!(
                "query dimension {} does not match dataset dimension {}",
                self.dim(),
                dataset.dim()
            )));
        }
        Ok(())
    }
}

impl Deref for QuerySet {
    type Target = DenseDataset;

    fn deref(&self) -> &DenseDataset {
        &self.0
    }
}

impl From<DenseDataset> for QuerySet {
    fn from(ds: DenseDataset) -> Self {
        Self(ds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: u32,
    pub dist: f32,
}

impl Neighbor {
    pub fn new(id: u32, dist: f32) -> Self {
        Self { id, dist }
    }

    /// Ascending distance, ties by ascending id.
    #[inline]
    pub fn cmp_by_dist(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.id.cmp(&other.id))
    }
}

pub fn sort_neighbors(list: &mut [Neighbor]) {
    list.sort_unstable_by(Neighbor::cmp_by_dist);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    /// Directed K-NN graph with `k` out-edges per node.
    KnnGraph { k: usize },
    /// Bidirected diversified graph with `kappa` selected neighbors per node.
    Dpg { kappa: usize },
}

impl GraphKind {
    /// K for a K-NN graph, kappa for a DPG.
    pub fn degree_param(&self) -> usize {
        match *self {
            GraphKind::KnnGraph { k } => k,
            GraphKind::Dpg { kappa } => kappa,
        }
    }
}

/// Adjacency lists with cached edge distances, each sorted by [`Neighbor::cmp_by_dist`].
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    kind: GraphKind,
    adjacency: Vec<Vec<Neighbor>>,
}

impl NeighborGraph {
    /// Builds a graph and checks every invariant of `kind`.
    pub fn new(kind: GraphKind, adjacency: Vec<Vec<Neighbor>>) -> Result<Self> {
        let graph = Self { kind, adjacency };
        graph.validate()?;
        Ok(graph)
    }

    pub(crate) fn new_unchecked(kind: GraphKind, adjacency: Vec<Vec<Neighbor>>) -> Self {
        Self { kind, adjacency }
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    #[inline]
    pub fn neighbors(&self, node: usize) -> &[Neighbor] {
        &self.adjacency[node]
    }

    pub fn adjacency(&self) -> &[Vec<Neighbor>] {
        &self.adjacency
    }

    pub fn into_adjacency(self) -> Vec<Vec<Neighbor>> {
        self.adjacency
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    /// Bytes taken by ids and cached distances, plus one degree word per node.
    pub fn index_bytes(&self) -> usize {
        self.edge_count() * 8 + self.len() * 4
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.adjacency.len();
        if n == 0 {
            return Err(Error::usage("graph has no nodes"));
        }
        for (node, list) in self.adjacency.iter().enumerate() {
            check_list(node, list, n)?;
        }
        match self.kind {
            GraphKind::KnnGraph { k } => {
                let want = k.min(n - 1);
                for (node, list) in self.adjacency.iter().enumerate() {
                    if list.len() != want {
                        return Err(Error::Structural {
                            node,
                            message: format!("K-NN list has {} entries, expected {want}", list.len()),
                        });
                    }
                }
            }
            GraphKind::Dpg { kappa } => {
                let edges = self.edge_count();
                if edges > 2 * kappa * n {
                    return Err(Error::Structural {
                        node: 0,
                        message: format!("{edges} directed edges exceed 2*kappa*n = {}", 2 * kappa * n),
                    });
                }
                for (node, list) in self.adjacency.iter().enumerate() {
                    for nb in list {
                        let back = &self.adjacency[nb.id as usize];
                        if !back.iter().any(|b| b.id as usize == node) {
                            return Err(Error::Structural {
                                node,
                                message: format!("edge to {} has no reverse edge", nb.id),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_list(node: usize, list: &[Neighbor], n: usize) -> Result<()> {
    let structural = |message: String| Error::Structural { node, message };
    for (i, nb) in list.iter().enumerate() {
        if nb.id as usize >= n {
            return Err(structural(format!("neighbor id {} out of range (n={n})", nb.id)));
        }
        if nb.id as usize == node {
            return Err(structural("self-loop".into()));
        }
        if !nb.dist.is_finite() || nb.dist < 0.0 {
            return Err(structural(format!("invalid distance {} to {}", nb.dist, nb.id)));
        }
        if i > 0 && list[i - 1].cmp_by_dist(nb) != Ordering::Less {
            return Err(structural(format!(
                "list not strictly sorted by (dist, id) at position {i}"
            )));
        }
    }
    let mut ids: Vec<u32> = list.iter().map(|nb| nb.id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(structural("duplicate neighbor id".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchParams {
    /// Number of results.
    pub k: usize,
    /// Candidate pool capacity L.
    pub pool_size: usize,
    /// Number of random entry points p.
    pub entry_count: usize,
    pub seed: u64,
}

impl SearchParams {
    pub fn new(k: usize, pool_size: usize) -> Self {
        Self {
            k,
            pool_size,
            ..Self::default()
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::usage("k must be at least 1"));
        }
        if self.pool_size < self.k {
            return Err(Error::usage(format!(
                "pool size L={} is smaller than k={}",
                self.pool_size, self.k
            )));
        }
        if self.pool_size > n {
            return Err(Error::usage(format!(
                "pool size L={} exceeds dataset size n={n}",
                self.pool_size
            )));
        }
        if self.entry_count == 0 {
            return Err(Error::usage("entry count p must be at least 1"));
        }
        if self.entry_count > n {
            return Err(Error::usage(format!(
                "entry count p={} exceeds dataset size n={n}",
                self.entry_count
            )));
        }
        Ok(())
    }
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            k: 20,
            pool_size: 40,
            entry_count: 10,
            seed: 42,
        }
    }
}

/// Euclidean distance with `f64` accumulation. Both slices must have equal length.
#[inline]
pub(crate) fn l2(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut sum = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let diff = f64::from(*x) - f64::from(*y);
        sum += diff * diff;
    }
    sum.sqrt() as f32
}

pub fn euclidean_distance(a: &[f32], b: &[f32]) -> Result<f32> {
    if a.len() != b.len() {
        return Err(Error::usage(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(l2(a, b))
}

/// Angle `xpy` in radians, in `[0, pi]`.
pub fn angle_at(p: &[f32], x: &[f32], y: &[f32]) -> Result<f64> {
    if p.len() != x.len() || p.len() != y.len() {
        return Err(Error::usage(format!(
            "dimension mismatch: p={} x={} y={}",
            p.len(),
            x.len(),
            y.len()
        )));
    }
    let (mut dot, mut nx, mut ny) = (0.0f64, 0.0f64, 0.0f64);
    for ((pi, xi), yi) in p.iter().zip(x).zip(y) {
        let u = f64::from(*xi) - f64::from(*pi);
        let v = f64::from(*yi) - f64::from(*pi);
        dot += u * v;
        nx += u * u;
        ny += v * v;
    }
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::Degenerate(
            "angle arm has zero length (point coincides with apex)".into(),
        ));
    }
    let cos = (dot / (nx.sqrt() * ny.sqrt())).clamp(-1.0, 1.0);
    Ok(cos.acos())
}
