//! Convex biclustering of data matrices.
//!
//! The fitting core is [`admm::AdmmEngine`]: an ADMM solver whose primal
//! update is a Sylvester equation, solved through cached symmetric
//! eigendecompositions. Around it sit fusion-weight construction
//! ([`weights`]), proximal maps ([`prox`]), label extraction and agreement
//! scores ([`cluster`]), tuning-parameter selection ([`tuning`]) and
//! simulation ([`simgen`]).

pub mod admm;
pub mod cluster;
pub mod data;
pub mod error;
pub mod linalg;
pub mod prox;
pub mod simgen;
pub mod sylvester;
pub mod tuning;
pub mod weights;

pub use admm::{fit, AdmmConfig, AdmmEngine, AdmmState, FitResult, Initialization};
pub use cluster::{adjusted_rand_index, bicluster_agreement, extract_labels, BiclusterLabels};
pub use data::DataMatrix;
pub use error::{Error, Result};
pub use prox::{NormKind, ProxOperator, ProxRegistry};
pub use weights::{build_knn_weights, full_edge_set, GraphAxis, WeightedEdgeSet};
