//! Dense and sparse linear algebra helpers.

mod congruence;
mod dense;
mod nullspace;
mod sparse;

pub use congruence::{block_diag, congruence};
pub use dense::SmallLu;
pub use nullspace::{pinned, NullspaceSolver};
pub use sparse::{
    dot, entries, from_triplets, matvec, matvec_t, norm, skew_defect, to_dense, to_sparse_sum, transpose,
    write_matrix_market, DirectSolver, Sparse, SOLVE_TOLERANCE,
};
