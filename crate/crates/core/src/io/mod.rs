//! Dataset files, synthetic bundles, checkpoints, and metric files.

mod checkpoint;
mod dataset;
mod metrics;
mod synth;

pub use checkpoint::{
    checkpoint_json, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint,
    CheckpointHeader, RngInfo, TensorEntry, FORMAT_VERSION, MAGIC,
};
pub use dataset::{
    load_dataset, DatasetBundle, DatasetStats, IdTables, ItemHistogram, GROUPS_FILE, ITEM_ITEM_FILE, USER_ITEM_FILE,
};
pub use metrics::{
    loss_csv, loss_json, parse_reports_json, reports_csv, reports_json, round6, sig6, write_loss, write_reports,
    MetricsFormat, LOSS_HEADER, REPORT_HEADER,
};
pub use synth::{
    generate_synthetic, micro_bundle, shaped_bundle, GroupSizes, ShapeTarget, SignalMode, SyntheticSpec,
    MOOCCUBE_SHAPE, MOVIELENS_SHAPE,
};
