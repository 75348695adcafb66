//! Multiscale synchronization of the renormalized block instance.
//!
//! Level-0 blocks are the interior blocks of a [`crate::geometry::BlockPartition`].
//! A level-(k+1) block is a cube of `l_k = 2 kappa (k+1)^2 + 1` level-k
//! blocks centred on the origin lattice `l_k Z^d`. Within each parent,
//! children are aligned by a spanning tree on the largest connected set of
//! blocks that lie in no incoherent plaquette ("quartet").

mod hierarchy;
mod scales;
mod sync;

pub use hierarchy::{build_hierarchy, build_hierarchy_on, ell, Hierarchy, Level};
pub use scales::{check_scale_conditions, ConditionValue, ScaleReport};
pub use sync::{
    honest_good_audit, level_sync_vars, quartets_and_block_vars, synchronize, xi_edges, AuditRow, LevelStats,
    MultiscaleState,
};
