//! Readers and writers for `.fvecs` / `.ivecs` files and the graph index format.
//!
//! `.fvecs` and `.ivecs` store each vector as a little-endian `i32` dimension
//! followed by that many little-endian `f32` (resp. `i32`) values.
//!
//! Index files (little-endian throughout):
//!
//! ```text
//! "DPGI" | version: u32 | kind: u32 (0 = K-NN graph, 1 = DPG) | n: u32 | K or kappa: u32
//! per node: degree: u32, then degree x (id: u32, dist: f32)
//! ```
//!
//! Ground truth is stored as `<base>.ivecs` (ids), `<base>.fvecs` (distances)
//! and `<base>.json` (k and the brute-force baseline time).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DenseDataset, GraphKind, Neighbor, NeighborGraph};
use crate::oracle::GroundTruth;

pub const INDEX_MAGIC: &[u8; 4] = b"DPGI";
pub const INDEX_VERSION: u32 = 1;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn offset(&self) -> u64 {
        self.pos as u64
    }

    fn at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }

    fn take4(&mut self, what: &str) -> Result<[u8; 4]> {
        let end = self.pos + 4;
        if end > self.bytes.len() {
            return Err(Error::format(
                self.offset(),
                format!("truncated file: expected {what}, {} bytes left", self.bytes.len() - self.pos),
            ));
        }
        let word = self.bytes[self.pos..end].try_into().expect("4 bytes");
        self.pos = end;
        Ok(word)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        self.take4(what).map(u32::from_le_bytes)
    }

    fn i32(&mut self, what: &str) -> Result<i32> {
        self.take4(what).map(i32::from_le_bytes)
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        self.take4(what).map(f32::from_le_bytes)
    }
}

/// Splits a `*vecs` byte stream into records of 4-byte words.
fn parse_vecs<T>(bytes: &[u8], mut decode: impl FnMut(&mut Cursor<'_>) -> Result<T>) -> Result<(usize, Vec<T>)> {
    let mut cur = Cursor::new(bytes);
    let mut dim: Option<usize> = None;
    let mut values = Vec::new();
    while !cur.at_end() {
        let record = cur.offset();
        let d = cur.i32("vector dimension")?;
        if d <= 0 {
            return Err(Error::format(record, format!("non-positive dimension {d}")));
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::format(
                    record,
                    format!("dimension {d} differs from first record's {expected}"),
                ))
            }
            _ => {}
        }
        let need = d * 4;
        if bytes.len() - cur.pos < need {
            return Err(Error::format(
                record,
                format!("truncated record: {d} values need {need} bytes, {} left", bytes.len() - cur.pos),
            ));
        }
        for _ in 0..d {
            values.push(decode(&mut cur)?);
        }
    }
    match dim {
        Some(d) => Ok((d, values)),
        None => Err(Error::format(0, "file contains no vectors")),
    }
}

pub fn parse_fvecs(bytes: &[u8]) -> Result<DenseDataset> {
    let (d, data) = parse_vecs(bytes, |cur| {
        let at = cur.offset();
        let v = cur.f32("value")?;
        if !v.is_finite() {
            return Err(Error::format(at, format!("non-finite value {v}")));
        }
        Ok(v)
    })?;
    DenseDataset::new(data.len() / d, d, data)
}

pub fn encode_fvecs(dataset: &DenseDataset) -> Vec<u8> {
    let d = dataset.dim();
    let mut out = Vec::with_capacity(dataset.len() * (d + 1) * 4);
    for row in dataset.rows() {
        out.extend_from_slice(&(d as i32).to_le_bytes());
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_fvecs(path: impl AsRef<Path>) -> Result<DenseDataset> {
    parse_fvecs(&fs::read(path)?)
}

pub fn write_fvecs(dataset: &DenseDataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_fvecs(dataset))?;
    Ok(())
}

pub fn parse_ivecs(bytes: &[u8]) -> Result<Vec<Vec<i32>>> {
    let (d, flat) = parse_vecs(bytes, |cur| cur.i32("value"))?;
    Ok(flat.chunks_exact(d).map(<[i32]>::to_vec).collect())
}

pub fn encode_ivecs(rows: &[Vec<i32>]) -> Result<Vec<u8>> {
    let d = match rows.first() {
        Some(r) if !r.is_empty() => r.len(),
        _ => return Err(Error::usage("ivecs needs at least one non-empty row")),
    };
    let mut out = Vec::with_capacity(rows.len() * (d + 1) * 4);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != d {
            return Err(Error::usage(format!("row {i} has length {}, expected {d}", row.len())));
        }
        out.extend_from_slice(&(d as i32).to_le_bytes());
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn read_ivecs(path: impl AsRef<Path>) -> Result<Vec<Vec<i32>>> {
    parse_ivecs(&fs::read(path)?)
}

pub fn write_ivecs(rows: &[Vec<i32>], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_ivecs(rows)?)?;
    Ok(())
}

pub fn encode_index(graph: &NeighborGraph) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + graph.len() * 4 + graph.edge_count() * 8);
    out.extend_from_slice(INDEX_MAGIC);
    let (tag, param) = match graph.kind() {
        GraphKind::KnnGraph { k } => (0u32, k),
        GraphKind::Dpg { kappa } => (1u32, kappa),
    };
    for word in [INDEX_VERSION, tag, graph.len() as u32, param as u32] {
        out.extend_from_slice(&word.to_le_bytes());
    }
    for list in graph.adjacency() {
        out.extend_from_slice(&(list.len() as u32).to_le_bytes());
        for nb in list {
            out.extend_from_slice(&nb.id.to_le_bytes());
            out.extend_from_slice(&nb.dist.to_le_bytes());
        }
    }
    out
}

pub fn decode_index(bytes: &[u8]) -> Result<NeighborGraph> {
    let mut cur = Cursor::new(bytes);
    if cur.take4("magic")? != *INDEX_MAGIC {
        return Err(Error::format(0, "bad magic, not a DPGI index"));
    }
    let version = cur.u32("version")?;
    if version != INDEX_VERSION {
        return Err(Error::format(4, format!("unsupported index version {version}")));
    }
    let kind_at = cur.offset();
    let tag = cur.u32("kind tag")?;
    let n = cur.u32("node count")? as usize;
    let param = cur.u32("degree parameter")? as usize;
    let kind = match tag {
        0 => GraphKind::KnnGraph { k: param },
        1 => GraphKind::Dpg { kappa: param },
        other => return Err(Error::format(kind_at, format!("unknown graph kind tag {other}"))),
    };
    let mut adjacency = Vec::with_capacity(n.min(bytes.len() / 4));
    let mut node_offsets = Vec::with_capacity(n.min(bytes.len() / 4));
    for _ in 0..n {
        node_offsets.push(cur.offset());
        let degree = cur.u32("node degree")? as usize;
        if degree > (bytes.len() - cur.pos) / 8 {
            return Err(Error::format(
                cur.offset(),
                format!("truncated file: degree {degree} exceeds remaining bytes"),
            ));
        }
        let mut list = Vec::with_capacity(degree);
        for _ in 0..degree {
            let id = cur.u32("neighbor id")?;
            let dist = cur.f32("neighbor distance")?;
            list.push(Neighbor::new(id, dist));
        }
        adjacency.push(list);
    }
    if !cur.at_end() {
        return Err(Error::format(cur.offset(), "trailing bytes after last node"));
    }
    NeighborGraph::new(kind, adjacency).map_err(|e| match e {
        Error::Structural { node, message } => Error::format(
            node_offsets.get(node).copied().unwrap_or(0),
            format!("node {node}: {message}"),
        ),
        other => Error::format(0, other.to_string()),
    })
}

pub fn save_index(graph: &NeighborGraph, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_index(graph))?;
    w.flush()?;
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>) -> Result<NeighborGraph> {
    decode_index(&fs::read(path)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct GroundTruthMeta {
    k: usize,
    queries: usize,
    baseline_time_secs: f64,
}

fn with_ext(base: &Path, ext: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Paths written by [`save_ground_truth`] for `base`: ids, distances, metadata.
pub fn ground_truth_paths(base: impl AsRef<Path>) -> [PathBuf; 3] {
    let base = base.as_ref();
    [with_ext(base, "ivecs"), with_ext(base, "fvecs"), with_ext(base, "json")]
}

pub fn save_ground_truth(gt: &GroundTruth, base: impl AsRef<Path>) -> Result<()> {
    let [ids_path, dist_path, meta_path] = ground_truth_paths(base);
    let ids: Vec<Vec<i32>> = gt
        .neighbors
        .iter()
        .map(|l| l.iter().map(|nb| nb.id as i32).collect())
        .collect();
    write_ivecs(&ids, ids_path)?;
    let dists: Vec<f32> = gt.neighbors.iter().flatten().map(|nb| nb.dist).collect();
    write_fvecs(&DenseDataset::new(gt.len(), gt.k, dists)?, dist_path)?;
    let meta = GroundTruthMeta {
        k: gt.k,
        queries: gt.len(),
        baseline_time_secs: gt.baseline_time,
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::format(0, e.to_string()))?;
    fs::write(meta_path, json)?;
    Ok(())
}

pub fn load_ground_truth(base: impl AsRef<Path>) -> Result<GroundTruth> {
    let [ids_path, dist_path, meta_path] = ground_truth_paths(base);
    let meta: GroundTruthMeta = serde_json::from_slice(&fs::read(&meta_path)?)
        .map_err(|e| Error::format(e.column() as u64, format!("{}: {e}", meta_path.display())))?;
    let ids = read_ivecs(&ids_path)?;
    let dists = read_fvecs(&dist_path)?;
    if ids.len() != meta.queries || dists.len() != meta.queries {
        return Err(Error::format(
            0,
            format!(
                "ground truth has {} id rows and {} distance rows, metadata says {}",
                ids.len(),
                dists.len(),
                meta.queries
            ),
        ));
    }
    if ids[0].len() != meta.k || dists.dim() != meta.k {
        return Err(Error::format(0, format!("ground truth rows do not have k={} entries", meta.k)));
    }
    let mut neighbors = Vec::with_capacity(ids.len());
    for (qi, row) in ids.iter().enumerate() {
        let mut list = Vec::with_capacity(meta.k);
        for (&id, &dist) in row.iter().zip(dists.row(qi)) {
            if id < 0 {
                return Err(Error::format(0, format!("negative id {id} in query {qi}")));
            }
            list.push(Neighbor::new(id as u32, dist));
        }
        neighbors.push(list);
    }
    Ok(GroundTruth {
        k: meta.k,
        neighbors,
        baseline_time: meta.baseline_time_secs,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn fvecs_exact_bytes() {
        let ds = DenseDataset::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert_eq!(
            encode_fvecs(&ds),
            vec![0x02, 0, 0, 0, 0, 0, 0x80, 0x3F, 0, 0, 0, 0x40]
        );
    }

    #[test]
    fn fvecs_errors_carry_offsets() {
        let ds = DenseDataset::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let bytes = encode_fvecs(&ds);
        match parse_fvecs(&bytes[..bytes.len() - 2]) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 12),
            other => panic!("{other:?}"),
        }
        let mut bad_dim = bytes.clone();
        bad_dim[12] = 3;
        assert!(matches!(parse_fvecs(&bad_dim), Err(Error::Format { offset: 12, .. })));
        let mut zero = bytes.clone();
        zero[0] = 0;
        assert!(matches!(parse_fvecs(&zero), Err(Error::Format { offset: 0, .. })));
        assert!(matches!(parse_fvecs(&[]), Err(Error::Format { .. })));
        assert!(matches!(parse_fvecs(&[1, 0]), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn ivecs_round_trip() {
        let rows = vec![vec![1, -2, 3], vec![4, 5, 6]];
        assert_eq!(parse_ivecs(&encode_ivecs(&rows).unwrap()).unwrap(), rows);
        assert!(encode_ivecs(&[vec![1], vec![1, 2]]).is_err());
    }

    fn tiny_dpg() -> NeighborGraph {
        let nb = Neighbor::new;
        NeighborGraph::new(
            GraphKind::Dpg { kappa: 1 },
            vec![vec![nb(1, 0.5)], vec![nb(0, 0.5), nb(2, 1.5)], vec![nb(1, 1.5)]],
        )
        .unwrap()
    }

    #[test]
    fn index_header_layout() {
        let bytes = encode_index(&tiny_dpg());
        assert_eq!(&bytes[..4], b"DPGI");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &3u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &1u32.to_le_bytes());
        assert_eq!(bytes.len(), 20 + 3 * 4 + 4 * 8);
        assert_eq!(decode_index(&bytes).unwrap(), tiny_dpg());
    }

    #[test]
    fn index_rejects_corruption() {
        let bytes = encode_index(&tiny_dpg());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(decode_index(&magic), Err(Error::Format { offset: 0, .. })));
        let mut version = bytes.clone();
        version[4] = 9;
        assert!(matches!(decode_index(&version), Err(Error::Format { offset: 4, .. })));
        assert!(matches!(decode_index(&bytes[..bytes.len() - 3]), Err(Error::Format { .. })));
        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(matches!(decode_index(&trailing), Err(Error::Format { .. })));
    }

    #[test]
    fn index_rejects_asymmetric_dpg() {
        let nb = Neighbor::new;
        let asym = NeighborGraph::new_unchecked(
            GraphKind::Dpg { kappa: 1 },
            vec![vec![nb(1, 0.5)], vec![], vec![nb(1, 1.5)]],
        );
        let err = decode_index(&encode_index(&asym)).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 20, .. }), "{err:?}");
    }

    #[test]
    fn ground_truth_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let gt = GroundTruth {
            k: 2,
            neighbors: vec![
                vec![Neighbor::new(3, 0.25), Neighbor::new(1, 0.5)],
                vec![Neighbor::new(0, 1.0), Neighbor::new(2, 2.0)],
            ],
            baseline_time: 1.5e-4,
        };
        let base = dir.path().join("gt");
        save_ground_truth(&gt, &base).unwrap();
        assert_eq!(load_ground_truth(&base).unwrap(), gt);
    }

    fn arb_graph() -> impl Strategy<Value = NeighborGraph> {
        (2usize..20, 1usize..4).prop_flat_map(|(n, k)| {
            let k = k.min(n - 1);
            prop::collection::vec(prop::collection::vec(0.0f32..10.0, n), n).prop_map(move |w| {
                let adj = (0..n)
                    .map(|v| {
                        let mut l: Vec<Neighbor> = (0..n)
                            .filter(|&u| u != v)
                            .map(|u| Neighbor::new(u as u32, w[v][u]))
                            .collect();
                        crate::model::sort_neighbors(&mut l);
                        l.truncate(k);
                        l
                    })
                    .collect();
                NeighborGraph::new(GraphKind::KnnGraph { k }, adj).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn fvecs_round_trip(rows in prop::collection::vec(prop::collection::vec(-1e6f32..1e6, 5), 1..20)) {
            let ds = DenseDataset::from_rows(&rows).unwrap();
            let bytes = encode_fvecs(&ds);
            let back = parse_fvecs(&bytes).unwrap();
            prop_assert_eq!(&back, &ds);
            prop_assert_eq!(encode_fvecs(&back), bytes);
        }

        #[test]
        fn index_round_trip(g in arb_graph()) {
            let bytes = encode_index(&g);
            let back = decode_index(&bytes).unwrap();
            prop_assert_eq!(encode_index(&back), bytes);
            prop_assert_eq!(back, g);
        }
    }
}
