//! Kernel-alignment unsupervised feature selection.
//!
//! Features are scored by how well a low-rank nonnegative reconstruction
//! `X W H` preserves the centered kernel geometry of the samples. The crate
//! provides the single-kernel solver ([`kaufs`]), a multiple-kernel variant
//! that also learns a convex combination of candidate kernels ([`mkaufs`]),
//! clustering-based evaluation ([`evalmetrics`]), dataset handling
//! ([`datapipe`]) and a grid-search experiment runner ([`harness`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datapipe;
pub mod error;
pub mod evalmetrics;
pub mod harness;
pub mod kaufs;
pub mod kernelspace;
pub mod mkaufs;

pub use error::{Error, Result};
pub use kaufs::{AlignmentScale, Divergence, FactorPair, Init, Problem, SelectionResult, SolverConfig, SolverTrace};
pub use kernelspace::{DataMatrix, GramMatrix, GramState, Kernel, SignSplit};
pub use mkaufs::{KernelBank, KernelWeights, MkSelection};
pub use evalmetrics::{ClusteringLabels, EvalReport};
pub use datapipe::{DatasetSpec, LabelColumn, PlantedSpec};
pub use harness::{ExperimentConfig, Method, RunRecord};
