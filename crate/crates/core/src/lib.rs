//! Clustering and signal recovery for high-dimensional data whose cluster
//! separating signal lives on contiguous blocks of coordinates.
//!
//! Two pipelines are provided:
//!
//! - [`cfa`]: a pre-clustering screen that pairs every candidate block with a
//!   distant partner block and keeps blocks whose aggregated cross products are
//!   significant, followed by PCA on the aggregated features of the kept
//!   blocks. Suited to sparse block signals.
//! - [`ma`]: PCA on column-wise moving averages, followed by the
//!   post-clustering block scan in [`recovery`]. Suited to dense block signals.
//!
//! Both work on vector-valued observations (1-D [`Block`]s) and on
//! matrix-valued observations laid out on a `p1 x p2` grid ([`TensorBlock`]s).
//!
//! The crate is `no_std` and only needs `alloc`. IO, the command line and the
//! parallel simulation driver live in the companion `blocksig` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod baselines;
pub mod block;
pub mod cfa;
pub mod data;
pub mod error;
pub mod ma;
pub mod minimax;
pub mod numerics;
pub mod recovery;
pub mod sim;
mod stepdown;
pub mod tuning;

pub use block::{Block, BlockSet, EnumerationMode, Region, SelectedBlock, TensorBlock};
pub use data::{DataMatrix, GridShape, LabelVector};
pub use error::{Error, Result};
