//! Telemetry curation pipeline: CSV ingestion, channel filtering, temporal
//! alignment, channel pruning, sparse-trace interpolation, synthetic anomaly
//! augmentation, and split construction, with manifested outputs.

pub mod align;
pub mod curate;
pub mod filter;
pub mod ingest;
pub mod inject;
pub mod interpolate;
pub mod prune;
pub mod split;
pub mod types;

pub use align::align_temporal;
pub use curate::{
    curate_path, curate_table, load_curated_dir, read_curated_csv, write_curated_csv, write_entry,
    CurateOptions, CurateSummary, CuratedEntry,
};
pub use filter::filter_channels;
pub use ingest::{ingest_csv, ingest_reader};
pub use inject::{inject_anomalies, AnomalyKind, AnomalySpec};
pub use interpolate::interpolate_sparse;
pub use prune::prune_channels;
pub use split::{split_per_series, split_temporal, SplitSpec, SplitStrategy};
pub use types::{
    dataset_from_rows, CurationReport, CuratedDataset, DroppedItem, Labels, Manifest, RawColumn,
    RawTable, Split,
};
