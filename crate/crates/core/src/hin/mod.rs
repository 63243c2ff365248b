//! Heterogeneous network model: schema, path specs, and interaction matrices.

mod ids;
mod matrix;
mod paths;
mod schema;
mod store;

pub use ids::{natural_cmp, IdMap};
pub use matrix::BinMatrix;
pub use paths::{enumerate_path_incidence, PathIncidence};
pub use schema::{NetworkSchema, Node, PathKind, PathSpec, RelationType, COURSE, GROUP, ITEM, USER, VIDEO};
pub use store::{AuxRecords, AuxRelation, AuxRelations, GroupTable, InteractionStore, MergedTargets};
