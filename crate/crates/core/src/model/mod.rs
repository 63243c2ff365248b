//! Path-aware attention user preferences, gated fusion, group aggregation,
//! and their hand-written backward passes.

mod group;
mod inputs;
mod objective;
mod params;
mod user;

pub use group::{aggregate, aggregate_backward, meanpool_aggregate, GroupPreference};
pub use inputs::{ModelInputs, TargetMode};
pub use objective::{
    group_batch, group_example, group_logits, group_preference, group_scores, predict, target_loss, user_batch,
    user_example, user_hats, user_scores, ExampleGrad, Members, Prediction, LOG_FLOOR,
};
pub use params::{AggIdx, AggregatorKind, AttnIdx, Branches, Grads, Layout, MlpIdx, ModelParams, ModelSpec, Role};
pub use user::{backward_user, embed_user, forward_user, AttnTrace, ItemEmbeddings, MlpTrace, UserPreferenceState};

/// Normalised weight vectors produced during a forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WeightKind {
    Alpha,
    Beta,
    Gamma,
    Pi,
}

/// Receives every attention / output distribution computed in a forward
/// pass. Implementations must tolerate concurrent calls.
pub trait WeightObserver: Sync {
    fn observe(&self, kind: WeightKind, weights: &[f64]);
}
