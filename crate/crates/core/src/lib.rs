//! Locality-weighted sparse coding on the probability simplex.
//!
//! The library covers three layers:
//!
//! * exact recovery machinery: brute-force Delaunay triangulation of a
//!   landmark set, the weighted ℓ0/ℓ1 metrics, and enumeration solvers
//!   that certify face recovery for points in the hull;
//! * dictionary learning (KDS): an unrolled accelerated projected
//!   gradient encoder with an exact reverse-mode gradient in the
//!   dictionary, trained by minibatch descent;
//! * a downstream clustering pipeline: code-similarity graph, normalized
//!   spectral embedding, k-means, and matching-based accuracy.

pub mod cluster;
pub mod data;
pub mod dictionary;
pub mod encoder;
pub mod error;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod simplex;
pub mod train;

pub use cluster::{clustering_accuracy, kmeans, similarity_graph, spectral_embed, ClusterLabels, SimilarityGraph};
pub use data::{gen_circle, gen_delaunay_model, gen_two_moons, load_idx, Dataset, GenerativeGroundTruth};
pub use dictionary::Dictionary;
pub use encoder::{
    batch_encode, encode, encode_from, momentum_schedule, EncodeTrajectory, MomentumSchedule,
};
pub use error::{Error, Result};
pub use geometry::{barycentric_coords, circumsphere, delaunay_triangulate, general_position_check, locate_cell, CircumSphere, Landmarks, Triangulation};
pub use oracle::{solve_weighted_l0_exact, solve_weighted_l1_exact, verify_recovery, RecoveryResult};
pub use simplex::{loss_gradient_x, penalized_loss, project_simplex, weighted_l0, weighted_l1, PenalizedLossParams, SimplexCode};
pub use train::{init_dictionary, loss_gradient_a, reconstruct, train, StepSize, TrainConfig, TrainReport};

/// Worker thread cap for the data-parallel batch operations.
///
/// `SIMPLEXCODE_THREADS` overrides the detected parallelism; results are
/// independent of the thread count by construction.
pub fn worker_threads() -> usize {
    if let Ok(v) = std::env::var("SIMPLEXCODE_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
