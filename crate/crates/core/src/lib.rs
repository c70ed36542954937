//! Inference over compressed state sequences of linear-chain models.
//!
//! A labeling such as `[A, A, B, B, B, A]` compresses to its run-collapsed
//! form `[A, B, A]`. For a chain model over `M` states and an observation
//! sequence of length `T`, this crate computes, without enumerating the
//! `M^T` labelings:
//!
//! * the probability of any given compressed sequence,
//! * the distribution of the compressed length,
//! * per-position marginals of the compressed sequence at a given length,
//! * a compressed decode built from those marginals.
//!
//! Standard Viterbi and forward-backward decoders are included as baselines,
//! along with a brute-force enumerator for checking results on tiny inputs,
//! the edit-distance metrics used to score predictions, and a grid-world
//! robot simulator that produces labeled data.
//!
//! ```
//! use compressed_inference::{compress, compressed_decode, ChainModel, Normalization, Vocabulary};
//!
//! let model = ChainModel::from_rows(
//!     Vocabulary::new(["rain", "sun"])?,
//!     Vocabulary::new(["wet", "dry"])?,
//!     vec![0.0, 0.0],
//!     vec![vec![2.0, 0.0], vec![0.0, 2.0]],
//!     vec![vec![1.5, -1.5], vec![-1.5, 1.5]],
//! )?;
//! let obs = [0, 0, 0, 1, 1, 1, 1, 0, 0];
//! let decoded = compressed_decode(&model, &obs, obs.len(), Normalization::Exact)?;
//! assert_eq!(decoded.states, vec![0, 1, 0]);
//! assert_eq!(compress(&[0, 0, 1, 1, 0])?.entries(), &[0, 1, 0]);
//! # Ok::<(), compressed_inference::Error>(())
//! ```
//!
//! Times, rows and compressed positions are 0-based. Lengths (`c`, `c_max`)
//! are counts.

pub mod compressed;
pub mod datagen;
pub mod error;
pub mod io;
pub mod logspace;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod vanilla;

pub use compressed::{
    compressed_decode, compressed_marginal, compressed_marginal_row, compressed_marginal_table,
    compressed_sequence_log_lattice, constraint_log_z, default_c_max, length_distribution, log_partition_via_table,
    table_forward, CompressedDecode, ConstraintSet, LatticeTable, LengthDistribution, Normalization,
};
pub use error::{Error, Result};
pub use metrics::{edit_distance, eds, evaluate, exact_score, EvaluationReport, PairScore};
pub use model::{
    compress, estimate_counts, sequence_log_score, ChainModel, CompressedSequence, LabeledSequence,
    ObservationAlphabet, Prev, StateSpace, Vocabulary,
};
pub use oracle::OracleBudget;
pub use vanilla::{
    baseline_compressed, constrained_log_z, forward_backward, marginal_decode, posterior_marginals, viterbi, Baseline,
    ConstraintList,
};
