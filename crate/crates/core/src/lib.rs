//! Graph-based approximate nearest-neighbor search.
//!
//! The crate builds K-NN graphs with NN-descent ([`nndescent`]), turns them into
//! Diversified Proximity Graphs ([`dpg`]), and answers queries with greedy
//! best-first search ([`search`]). [`oracle`] supplies exact answers,
//! [`hardness`] measures how hard a workload is, [`workload`] generates
//! synthetic data, and [`bench`] / [`cli`] drive the measurement protocol.
//!
//! ```
//! use dpg_core::dpg::{build_dpg, DiversifyMethod, DpgParams};
//! use dpg_core::model::SearchParams;
//! use dpg_core::search::greedy_search;
//! use dpg_core::workload::gen_random_hypersphere;
//!
//! let data = gen_random_hypersphere(500, 8, 42).unwrap();
//! let index = build_dpg(&data, &DpgParams::new(5, DiversifyMethod::Counting)).unwrap();
//! let params = SearchParams { k: 5, pool_size: 20, entry_count: 4, seed: 42 };
//! let found = greedy_search(&data, &index, data.row(0), &params).unwrap();
//! assert_eq!(found.neighbors[0].id, 0);
//! ```

pub mod bench;
pub mod cli;
pub mod dpg;
pub mod error;
pub mod hardness;
pub mod model;
pub mod nndescent;
pub mod oracle;
pub mod search;
pub mod vecio;
pub mod workload;

pub use error::{Error, Result};
pub use model::{DenseDataset, GraphKind, Neighbor, NeighborGraph, QuerySet, SearchParams};
