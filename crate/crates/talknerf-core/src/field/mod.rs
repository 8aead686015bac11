//! The dual-branch conditional radiance field: condition fusion, the
//! audio-query attention module, and the density/color heads of the mouth
//! and face branches.

pub mod attention;
pub mod branch;
pub mod condition;
pub mod model;

pub use attention::{attend_backward, attend_forward};
pub use branch::{BranchRayCache, BranchScratch, RadianceBranch};
pub use condition::{ConditionCache, ConditionNet};
pub use model::FieldModel;
